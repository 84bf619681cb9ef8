mod common;

use lfdk::{super_resolve_with, DKNet, DKNetConfig, Dims5, InferOptions, KernelKind, LightField, SuperResolver};

fn tiny(kind: KernelKind) -> DKNet<f32> {
    let cfg = DKNetConfig { scale: 2, angular: (2, 2), feat_ch: 4, depth: 2, kind, ..DKNetConfig::default() };
    DKNet::build(cfg, 5).unwrap()
}

#[test]
fn tiled_matches_full_frame() {
    let net = tiny(KernelKind::Gamma);
    let lr = common::random_lf32(Dims5::new(2, 2, 3, 30, 26), &mut common::rng(1));
    let full = super_resolve_with(&net, &lr, &InferOptions { tile: Some(64), ..InferOptions::default() }).unwrap();
    for tile in [7, 10, 16] {
        let tiled = super_resolve_with(&net, &lr, &InferOptions { tile: Some(tile), ..InferOptions::default() }).unwrap();
        assert_eq!(tiled.dims(), Dims5::new(2, 2, 3, 60, 52));
        let worst = full.data().iter().zip(tiled.data()).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
        assert!(worst <= 1e-6, "tile {tile}: {worst}");
    }
}

#[test]
fn constant_input_gives_spatially_constant_interior() {
    let net = tiny(KernelKind::Sas);
    let d = Dims5::new(2, 2, 3, 24, 24);
    let lr = LightField::<f32>::from_fn(d, |u, v, c, _, _| 0.2 + 0.1 * (u + 2 * v + c) as f32 / 3.0);
    let out = net.forward_lr(&lr).unwrap();
    // Receptive radius is 3 LR px, so 6 LR px from the border is unaffected by padding.
    let (lo, hi) = (12, 48 - 12);
    for u in 0..2 {
        for v in 0..2 {
            for c in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        let r = out.at(u, v, c, lo + i, lo + j);
                        for y in (lo + i..hi).step_by(2) {
                            for x in (lo + j..hi).step_by(2) {
                                assert!((out.at(u, v, c, y, x) - r).abs() < 1e-5);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn wrong_angular_size_is_rejected() {
    let net = tiny(KernelKind::Sas);
    let lr = LightField::<f32>::zeros(Dims5::new(3, 3, 3, 8, 8));
    assert!(super_resolve_with(&net, &lr, &InferOptions::default()).is_err());
}
