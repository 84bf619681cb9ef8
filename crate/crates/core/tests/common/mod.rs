#![allow(dead_code)]

use rand::Rng;

use lfdk::{Dims5, LightField, Tensor4};

pub mod conv_ref;
pub mod gradcheck;

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    lfdk::rng(seed)
}

pub fn random_tensor(n: usize, c: usize, h: usize, w: usize, rng: &mut impl Rng) -> Tensor4<f64> {
    Tensor4::from_fn(n, c, h, w, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

pub fn random_lf(dims: Dims5, rng: &mut impl Rng) -> LightField<f64> {
    LightField::from_fn(dims, |_, _, _, _, _| rng.gen_range(0.0..1.0))
}

pub fn random_lf32(dims: Dims5, rng: &mut impl Rng) -> LightField<f32> {
    LightField::from_fn(dims, |_, _, _, _, _| rng.gen_range(0.0f32..1.0))
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference of `f` with respect to `params[i]`.
pub fn central_diff(params: &mut [f64], i: usize, eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = params[i];
    params[i] = orig + eps;
    let plus = f(params);
    params[i] = orig - eps;
    let minus = f(params);
    params[i] = orig;
    (plus - minus) / (2.0 * eps)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Error of `analytic` against finite differences of a function that is
/// piecewise linear in the probed parameter (a ReLU network under a linear
/// probe). Away from a kink the central and one-sided slopes coincide; when
/// an activation flips inside `[θ − ε, θ + ε]` the slope on the unaffected
/// side is still exact, so the smallest of the three errors is reported.
pub fn piecewise_linear_err(analytic: f64, f_minus: f64, f_0: f64, f_plus: f64, eps: f64, floor: f64) -> f64 {
    let central = (f_plus - f_minus) / (2.0 * eps);
    let fwd = (f_plus - f_0) / eps;
    let bwd = (f_0 - f_minus) / eps;
    [central, fwd, bwd].into_iter().map(|n| rel_err(analytic, n, floor)).fold(f64::INFINITY, f64::min)
}
