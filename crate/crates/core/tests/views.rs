//! Sub-space reshapes, slices and stage compositions against index-formula oracles.

mod common;

use proptest::prelude::*;
use rand::Rng;

use lfdk::nn::{relu_inplace, Conv2D};
use lfdk::{
    from_view, to_view, DKNet, DKNetConfig, DecompositionKernel, Dims5, KernelKind, LightField, SubspacePair,
    SubspaceStage, Tensor4,
};

fn extent(d: Dims5, axis: usize) -> usize {
    [d.u, d.v, d.h, d.w][axis]
}

fn get(lf: &LightField<f64>, q: [usize; 4], c: usize) -> f64 {
    lf.at(q[0], q[1], c, q[2], q[3])
}

/// Canonical coordinates of view element `(b, i, j)` of `pair`.
fn coords(pair: SubspacePair, d: Dims5, b: usize, i: usize, j: usize) -> [usize; 4] {
    let (a1, a2) = pair.conv_axes();
    let (b1, b2) = pair.batch_axes();
    let n2 = extent(d, b2 as usize);
    let mut q = [0; 4];
    q[a1 as usize] = i;
    q[a2 as usize] = j;
    q[b1 as usize] = b / n2;
    q[b2 as usize] = b % n2;
    q
}

/// Applies `conv` + ReLU to every 2D slice of `pair`, one slice at a time.
fn slice_oracle(lf: &LightField<f64>, pair: SubspacePair, conv: &Conv2D<f64>) -> LightField<f64> {
    let d = lf.dims();
    let (a1, a2) = pair.conv_axes();
    let (b1, b2) = pair.batch_axes();
    let (n1, n2) = (extent(d, a1 as usize), extent(d, a2 as usize));
    let batches = extent(d, b1 as usize) * extent(d, b2 as usize);
    let mut out = LightField::zeros(d.with_channels(conv.out_ch));
    for b in 0..batches {
        let img = Tensor4::from_fn(1, d.c, n1, n2, |_, c, i, j| get(lf, coords(pair, d, b, i, j), c));
        let mut y = conv.forward(&img).unwrap();
        relu_inplace(&mut y.data);
        for c in 0..conv.out_ch {
            for i in 0..n1 {
                for j in 0..n2 {
                    let q = coords(pair, d, b, i, j);
                    out.set(q[0], q[1], c, q[2], q[3], y.at(0, c, i, j));
                }
            }
        }
    }
    out
}

fn close(a: &LightField<f64>, b: &LightField<f64>, tol: f64) {
    assert_eq!(a.dims(), b.dims());
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_pair_round_trips(u in 1usize..5, v in 1usize..5, c in 1usize..4, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let d = Dims5::new(u, v, c, h, w);
        let lf = common::random_lf(d, &mut common::rng(seed));
        for pair in SubspacePair::ALL {
            let view = to_view(&lf, pair);
            prop_assert_eq!(from_view(&view).unwrap(), lf.clone());
        }
    }

    #[test]
    fn view_elements_follow_index_formula(u in 1usize..4, v in 1usize..4, c in 1usize..3, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let d = Dims5::new(u, v, c, h, w);
        let lf = common::random_lf(d, &mut common::rng(seed));
        for pair in SubspacePair::ALL {
            let t = to_view(&lf, pair).tensor;
            let (b, d1, d2) = pair.view_shape(d);
            prop_assert_eq!(t.shape(), [b, c, d1, d2]);
            for bi in 0..b {
                for ch in 0..c {
                    for i in 0..d1 {
                        for j in 0..d2 {
                            prop_assert_eq!(t.at(bi, ch, i, j), get(&lf, coords(pair, d, bi, i, j), ch));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn epi_slices_follow_index_formula(u in 1usize..4, v in 1usize..4, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let d = Dims5::new(u, v, 2, h, w);
        let mut rng = common::rng(seed);
        let lf = common::random_lf(d, &mut rng);
        for pair in [SubspacePair::EpiUX, SubspacePair::EpiVY, SubspacePair::EpiUY, SubspacePair::EpiVX] {
            let (b1, b2) = pair.batch_axes();
            let fixed = (rng.gen_range(0..extent(d, b1 as usize)), rng.gen_range(0..extent(d, b2 as usize)));
            let epi = lf.extract_epi(pair, fixed, 1).unwrap();
            let b = fixed.0 * extent(d, b2 as usize) + fixed.1;
            for i in 0..epi.h {
                for j in 0..epi.w {
                    prop_assert_eq!(epi.at(0, i, j), get(&lf, coords(pair, d, b, i, j), 1));
                }
            }
        }
    }
}

#[test]
fn stages_match_per_slice_convolution() {
    let mut rng = common::rng(31);
    let lf = common::random_lf(Dims5::new(3, 4, 2, 5, 6), &mut rng);
    for pair in SubspacePair::ALL {
        let stage = SubspaceStage::<f64>::new(pair, 2, 3, &mut rng);
        close(&stage.forward(&lf).unwrap(), &slice_oracle(&lf, pair, &stage.conv), 1e-12);
    }
}

#[test]
fn kernels_match_chained_slice_oracles() {
    let mut rng = common::rng(32);
    let lf = common::random_lf(Dims5::new(3, 3, 2, 4, 5), &mut rng);
    for kind in [KernelKind::Gamma, KernelKind::Epi3, KernelKind::Dup2(2)] {
        let kernel = DecompositionKernel::<f64>::build(kind, 2, 3, &mut rng).unwrap();
        let mut want = lf.clone();
        for st in &kernel.stages {
            want = slice_oracle(&want, st.pair, &st.conv);
        }
        close(&kernel.forward(&lf).unwrap(), &want, 1e-12);
    }
}

/// Hand-assembled forward of a small network from module-level operations.
fn network_oracle(net: &DKNet<f64>, x: &LightField<f64>) -> LightField<f64> {
    let c = net.config;
    let d = x.dims();
    let init = slice_oracle(x, SubspacePair::Spatial, &net.initial.conv);
    let mut outs: Vec<LightField<f64>> = Vec::new();
    for (i, k) in net.kernels.iter().enumerate() {
        let mut parts: Vec<&LightField<f64>> = if i == 0 {
            vec![&init]
        } else if c.dense {
            outs.iter().rev().collect()
        } else {
            vec![&outs[i - 1]]
        };
        if c.raw {
            parts.push(x);
        }
        let mut cur = LightField::concat_channels(&parts).unwrap();
        for st in &k.stages {
            cur = slice_oracle(&cur, st.pair, &st.conv);
        }
        outs.push(cur);
    }
    let mut parts: Vec<&LightField<f64>> = if c.dense { outs.iter().rev().collect() } else { vec![outs.last().unwrap()] };
    if c.raw {
        parts.push(x);
    }
    let cat = LightField::concat_channels(&parts).unwrap();
    assert!(net.reduce1.is_none());

    // One angular image per spatial position, reduced to a vector of U·V·C·r² values.
    let s = c.shuffle_ch();
    let r = c.scale;
    let mut hr = LightField::zeros(Dims5::new(d.u, d.v, c.channels, d.h * r, d.w * r));
    for y in 0..d.h {
        for xx in 0..d.w {
            let img = Tensor4::from_fn(1, cat.dims().c, d.u, d.v, |_, ch, u, v| cat.at(u, v, ch, y, xx));
            let z = net.reduce2.forward(&img).unwrap();
            for u in 0..d.u {
                for v in 0..d.v {
                    for ch in 0..c.channels {
                        for i in 0..r {
                            for j in 0..r {
                                let k = (u * d.v + v) * s + ch * r * r + i * r + j;
                                hr.set(u, v, ch, y * r + i, xx * r + j, z.at(0, k, 0, 0));
                            }
                        }
                    }
                }
            }
        }
    }
    hr
}

#[test]
fn network_matches_hand_chained_oracle() {
    let mut rng = common::rng(33);
    for (dense, raw) in [(true, true), (false, false), (true, false), (false, true)] {
        let cfg = DKNetConfig { scale: 2, angular: (3, 3), channels: 3, feat_ch: 4, depth: 3, kind: KernelKind::Gamma, dense, raw };
        let net = DKNet::<f64>::build(cfg, 7).unwrap();
        let x = common::random_lf(Dims5::new(3, 3, 3, 5, 4), &mut rng);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.dims(), Dims5::new(3, 3, 3, 10, 8));
        close(&y, &network_oracle(&net, &x), 1e-10);
    }
}

#[test]
fn plain_chain_feeds_exactly_feat_channels() {
    let cfg = DKNetConfig { dense: false, raw: false, ..DKNetConfig::default() };
    let net = DKNet::<f32>::build(cfg, 0).unwrap();
    assert!(net.kernels.iter().all(|k| k.in_ch == cfg.feat_ch));
    assert_eq!(cfg.concat_channels(), cfg.feat_ch);
}

#[test]
fn translation_equivariant_away_from_borders() {
    let cfg = DKNetConfig { scale: 2, angular: (2, 2), channels: 1, feat_ch: 3, depth: 1, kind: KernelKind::Gamma, dense: true, raw: true };
    let net = DKNet::<f64>::build(cfg, 5).unwrap();
    let mut rng = common::rng(34);
    let x = common::random_lf(Dims5::new(2, 2, 1, 20, 20), &mut rng);
    let full = net.forward(&x).unwrap();
    // Receptive radius: 1 (initial) + 3 spatial stages per gamma kernel.
    let margin = 4;
    for (dy, dx) in [(1, 0), (0, 1), (2, 3)] {
        let shifted = net.forward(&x.crop_spatial(dy, dx, 20 - dy, 20 - dx).unwrap()).unwrap();
        for u in 0..2 {
            for v in 0..2 {
                for y in 2 * margin..2 * (20 - dy - margin) {
                    for xx in 2 * margin..2 * (20 - dx - margin) {
                        let a = shifted.at(u, v, 0, y, xx);
                        let b = full.at(u, v, 0, y + 2 * dy, xx + 2 * dx);
                        assert!((a - b).abs() < 1e-12, "shift ({dy},{dx}) at ({y},{xx}): {a} vs {b}");
                    }
                }
            }
        }
    }
}
