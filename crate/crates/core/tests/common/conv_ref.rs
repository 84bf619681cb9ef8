use rand::Rng;

use lfdk::nn::Conv2D;
use lfdk::Tensor4;

pub fn brute_force(conv: &Conv2D<f32>, x: &Tensor4<f32>) -> Option<Vec<f64>> {
    let (sh, sw) = conv.stride;
    let (ph, pw) = conv.pad;
    let hp = x.h + 2 * ph;
    let wp = x.w + 2 * pw;
    if hp < conv.kh || wp < conv.kw {
        return None;
    }
    let oh = (hp - conv.kh) / sh + 1;
    let ow = (wp - conv.kw) / sw + 1;
    let mut out = Vec::new();
    for n in 0..x.n {
        for o in 0..conv.out_ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias[o] as f64;
                    for i in 0..conv.in_ch {
                        for ky in 0..conv.kh {
                            for kx in 0..conv.kw {
                                let y = (oy * sh + ky) as isize - ph as isize;
                                let xx = (ox * sw + kx) as isize - pw as isize;
                                if y < 0 || xx < 0 || y >= x.h as isize || xx >= x.w as isize {
                                    continue;
                                }
                                let wi = ((o * conv.in_ch + i) * conv.kh + ky) * conv.kw + kx;
                                acc += conv.weight[wi] as f64 * x.at(n, i, y as usize, xx as usize) as f64;
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Some(out)
}

/// Checks `count` random convolutions (all dims ≤ 6, stride 1..=2, pad 0..=2)
/// against [`brute_force`], normwise relative error below 1e-6.
pub fn random_instances(count: usize, seed: u64) {
    let mut rng = super::rng(seed);
    let mut checked = 0;
    while checked < count {
        let (n, ci, co) = (rng.gen_range(1..=3), rng.gen_range(1..=6), rng.gen_range(1..=6));
        let (h, w) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let (kh, kw) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let stride = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let pad = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let mut conv = Conv2D::<f32>::new(ci, co, (kh, kw), stride, pad);
        conv.weight.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        conv.bias.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let x = Tensor4::from_fn(n, ci, h, w, |_, _, _, _| rng.gen_range(-1.0f32..1.0));
        let Some(want) = brute_force(&conv, &x) else {
            assert!(conv.forward(&x).is_err());
            continue;
        };
        let got = conv.forward(&x).unwrap();
        assert_eq!(got.len(), want.len());
        let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (g, w) in got.data.iter().zip(&want) {
            assert!((*g as f64 - w).abs() / scale < 1e-6, "got {g}, want {w}");
        }
        checked += 1;
    }
}
