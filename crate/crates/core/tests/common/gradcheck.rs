//! Finite-difference checks of every backward pass, in double precision.

use std::sync::Arc;

use rand::Rng;

use super::{central_diff, dot, rel_err};
use lfdk::losses::{combined_loss, lfvgg_loss, ConvStack, FeatureExtractor};
use lfdk::nn::{max_pool2, max_pool2_backward, pixel_shuffle, pixel_unshuffle, relu, relu_backward, Conv2D};
use lfdk::{DKNet, DKNetConfig, DecompositionKernel, Dims5, KernelKind, LightField, SubspacePair, SubspaceStage, Tensor4};

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;
/// The network objective is piecewise linear in each parameter, so a wider
/// step costs no truncation error and keeps roundoff below the tolerance.
const NET_EPS: f64 = 1e-5;

/// Zero biases put all-zero ReLU inputs exactly on the kink, where central
/// differences see half the slope; checks run at a generic point instead.
fn off_kink(bias: &mut [f64], rng: &mut impl Rng) {
    bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
}

fn check(analytic: f64, numeric: f64, what: &str) {
    let e = rel_err(analytic, numeric, FLOOR);
    assert!(e < TOL, "{what}: analytic {analytic} numeric {numeric} rel err {e}");
}

pub fn conv_backward() {
    let mut rng = super::rng(11);
    for (stride, pad, k) in [((1, 1), (1, 1), (3, 3)), ((2, 1), (0, 2), (2, 3)), ((2, 2), (1, 0), (4, 4))] {
        let mut conv = Conv2D::<f64>::new(3, 4, k, stride, pad);
        conv.weight.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        conv.bias.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let x = super::random_tensor(2, 3, 6, 7, &mut rng);
        let y = conv.forward(&x).unwrap();
        let probe = super::random_tensor(y.n, y.c, y.h, y.w, &mut rng);
        let (gx, grads) = conv.backward(&x, &probe).unwrap();

        let mut xs = x.data.clone();
        for i in 0..xs.len() {
            let n = central_diff(&mut xs, i, EPS, |d| {
                let t = Tensor4::from_vec(x.n, x.c, x.h, x.w, d.to_vec()).unwrap();
                dot(&conv.forward(&t).unwrap().data, &probe.data)
            });
            check(gx.data[i], n, "conv input");
        }
        let mut ws = conv.weight.clone();
        for i in 0..ws.len() {
            let n = central_diff(&mut ws, i, EPS, |d| {
                let mut c = conv.clone();
                c.weight = d.to_vec();
                dot(&c.forward(&x).unwrap().data, &probe.data)
            });
            check(grads.weight[i], n, "conv weight");
        }
        let mut bs = conv.bias.clone();
        for i in 0..bs.len() {
            let n = central_diff(&mut bs, i, EPS, |d| {
                let mut c = conv.clone();
                c.bias = d.to_vec();
                dot(&c.forward(&x).unwrap().data, &probe.data)
            });
            check(grads.bias[i], n, "conv bias");
        }
    }
}

pub fn relu_and_pool_backward() {
    let mut rng = super::rng(12);
    let x = super::random_tensor(2, 3, 6, 6, &mut rng);
    let probe = super::random_tensor(2, 3, 6, 6, &mut rng);
    let g = relu_backward(&x, &probe).unwrap();
    let mut xs = x.data.clone();
    for i in 0..xs.len() {
        let n = central_diff(&mut xs, i, EPS, |d| {
            dot(&relu(&Tensor4::from_vec(2, 3, 6, 6, d.to_vec()).unwrap()).data, &probe.data)
        });
        check(g.data[i], n, "relu");
    }

    let probe = super::random_tensor(2, 3, 3, 3, &mut rng);
    let g = max_pool2_backward(&x, &probe).unwrap();
    for i in 0..xs.len() {
        let n = central_diff(&mut xs, i, EPS, |d| {
            dot(&max_pool2(&Tensor4::from_vec(2, 3, 6, 6, d.to_vec()).unwrap()).data, &probe.data)
        });
        check(g.data[i], n, "max pool");
    }
}

pub fn pixel_shuffle_adjoint_is_unshuffle() {
    let mut rng = super::rng(13);
    let x = super::random_tensor(2, 12, 3, 4, &mut rng);
    let y = super::random_tensor(2, 3, 6, 8, &mut rng);
    let lhs = dot(&pixel_shuffle(&x, 2).unwrap().data, &y.data);
    let rhs = dot(&x.data, &pixel_unshuffle(&y, 2).unwrap().data);
    assert!((lhs - rhs).abs() < 1e-12);
}

fn stage_probe(stage: &SubspaceStage<f64>, x: &LightField<f64>, probe: &LightField<f64>) -> f64 {
    dot(stage.forward(x).unwrap().data(), probe.data())
}

pub fn subspace_stage_backward_every_pair() {
    let mut rng = super::rng(14);
    let dims = Dims5::new(3, 2, 2, 4, 3);
    for pair in SubspacePair::ALL {
        let mut stage = SubspaceStage::<f64>::new(pair, 2, 3, &mut rng);
        off_kink(&mut stage.conv.bias, &mut rng);
        let x = super::random_lf(dims, &mut rng);
        let out = stage.forward(&x).unwrap();
        let probe = super::random_lf(out.dims(), &mut rng);
        let (gx, grads) = stage.backward(&x, &out, &probe).unwrap();
        let mut xs = x.data().to_vec();
        for i in 0..xs.len() {
            let n = central_diff(&mut xs, i, EPS, |d| stage_probe(&stage, &LightField::from_vec(dims, d.to_vec()).unwrap(), &probe));
            check(gx.data()[i], n, &format!("{pair:?} input"));
        }
        let mut ws = stage.conv.weight.clone();
        for i in 0..ws.len() {
            let n = central_diff(&mut ws, i, EPS, |d| {
                let mut s = stage.clone();
                s.conv.weight = d.to_vec();
                stage_probe(&s, &x, &probe)
            });
            check(grads.weight[i], n, &format!("{pair:?} weight"));
        }
        let mut bs = stage.conv.bias.clone();
        for i in 0..bs.len() {
            let n = central_diff(&mut bs, i, EPS, |d| {
                let mut s = stage.clone();
                s.conv.bias = d.to_vec();
                stage_probe(&s, &x, &probe)
            });
            check(grads.bias[i], n, &format!("{pair:?} bias"));
        }
    }
}

pub fn gamma_kernel_backward() {
    let mut rng = super::rng(15);
    let dims = Dims5::new(2, 3, 2, 3, 4);
    let mut kernel = DecompositionKernel::<f64>::build(KernelKind::Gamma, 2, 3, &mut rng).unwrap();
    for st in &mut kernel.stages {
        off_kink(&mut st.conv.bias, &mut rng);
    }
    let x = super::random_lf(dims, &mut rng);
    let (out, cache) = kernel.forward_cached(x.clone()).unwrap();
    let probe = super::random_lf(out.dims(), &mut rng);
    let (gx, grads) = kernel.backward(&cache, &probe).unwrap();
    let f = |k: &DecompositionKernel<f64>, x: &LightField<f64>| dot(k.forward(x).unwrap().data(), probe.data());
    let mut xs = x.data().to_vec();
    for i in 0..xs.len() {
        let n = central_diff(&mut xs, i, EPS, |d| f(&kernel, &LightField::from_vec(dims, d.to_vec()).unwrap()));
        check(gx.data()[i], n, "kernel input");
    }
    for (s, g) in grads.iter().enumerate() {
        let mut bs = kernel.stages[s].conv.bias.clone();
        for i in 0..bs.len() {
            let n = central_diff(&mut bs, i, EPS, |d| {
                let mut k = kernel.clone();
                k.stages[s].conv.bias = d.to_vec();
                f(&k, &x)
            });
            check(g.bias[i], n, &format!("kernel stage {s} bias {i}"));
        }
    }
}

pub fn feature_losses_backward() {
    let mut rng = super::rng(16);
    let dims = Dims5::new(2, 2, 3, 12, 12);
    let y = super::random_lf(dims, &mut rng);
    let y_hat = super::random_lf(dims, &mut rng);
    let phi: Arc<dyn FeatureExtractor<f64>> = Arc::new(ConvStack::<f64>::standin_small(3));
    let lv = combined_loss(&y, &y_hat, 0.3, phi.as_ref()).unwrap();
    let lf = lfvgg_loss(&y, &y_hat, phi.as_ref()).unwrap();
    let mut d = y_hat.data().to_vec();
    for i in (0..d.len()).step_by(7) {
        let n = central_diff(&mut d, i, EPS, |p| {
            combined_loss(&y, &LightField::from_vec(dims, p.to_vec()).unwrap(), 0.3, phi.as_ref()).unwrap().value
        });
        check(lv.grad.data()[i], n, "combined loss");
        let n = central_diff(&mut d, i, EPS, |p| {
            lfvgg_loss(&y, &LightField::from_vec(dims, p.to_vec()).unwrap(), phi.as_ref()).unwrap().value
        });
        check(lf.grad.data()[i], n, "feature loss");
    }
}

/// Every parameter of a tiny gamma network against finite differences.
pub fn tiny_network_end_to_end() {
    let cfg = DKNetConfig { scale: 2, angular: (3, 3), channels: 3, feat_ch: 4, depth: 2, kind: KernelKind::Gamma, dense: true, raw: true };
    let mut net = DKNet::<f64>::build(cfg, 21).unwrap();
    let mut rng = super::rng(22);
    for conv in net.conv_layers_mut() {
        off_kink(&mut conv.bias, &mut rng);
    }
    let x = super::random_lf(Dims5::new(3, 3, 3, 8, 8), &mut rng);
    let (out, cache) = net.forward_cached(&x).unwrap();
    let probe = LightField::from_fn(out.dims(), |_, _, _, _, _| rng.gen_range(-1.0..1.0));
    let grads = net.backward(&cache, &probe).unwrap();
    let layers = net.conv_layers().len();
    assert_eq!(grads.len(), layers);

    let objective = |m: &DKNet<f64>| dot(m.forward(&x).unwrap().data(), probe.data());
    let f0 = objective(&net);
    let mut worst = 0.0f64;
    for l in 0..layers {
        for bias in [false, true] {
            let len = if bias { grads[l].bias.len() } else { grads[l].weight.len() };
            for i in 0..len {
                let eval = |delta: f64| {
                    let mut m = net.clone();
                    let conv = &mut m.conv_layers_mut()[l];
                    if bias {
                        conv.bias[i] += delta;
                    } else {
                        conv.weight[i] += delta;
                    }
                    objective(&m)
                };
                let analytic = if bias { grads[l].bias[i] } else { grads[l].weight[i] };
                let e = super::piecewise_linear_err(analytic, eval(-NET_EPS), f0, eval(NET_EPS), NET_EPS, FLOOR);
                assert!(e < TOL, "layer {l} bias={bias} index {i}: rel err {e}");
                worst = worst.max(e);
            }
        }
    }
    assert!(worst < TOL, "worst relative error {worst}");
}
