//! Shared fixtures for the benchmarks in `benches/`.

use lfdk::{Dims5, LightField, Tensor4};

/// Deterministic pseudo-random value in `[0, 1)` from an index.
fn hash01(i: usize) -> f32 {
    let mut x = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 29;
    (x >> 40) as f32 / (1u64 << 24) as f32
}

pub fn light_field(dims: Dims5) -> LightField<f32> {
    let mut i = 0;
    LightField::from_fn(dims, |_, _, _, _, _| {
        i += 1;
        hash01(i)
    })
}

pub fn tensor(n: usize, c: usize, h: usize, w: usize) -> Tensor4<f32> {
    let mut i = 0;
    Tensor4::from_fn(n, c, h, w, |_, _, _, _| {
        i += 1;
        hash01(i) - 0.5
    })
}
