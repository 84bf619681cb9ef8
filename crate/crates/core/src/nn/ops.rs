use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub fn relu<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let mut y = x.clone();
    relu_inplace(&mut y.data);
    y
}

pub fn relu_inplace<T: Scalar>(data: &mut [T]) {
    for v in data {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Passes `grad_out` where `x > 0`; the subgradient at zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::DimensionMismatch(format!("relu gradient {:?} vs input {:?}", grad_out.shape(), x.shape())));
    }
    let mut g = grad_out.clone();
    relu_mask(&x.data, &mut g.data);
    Ok(g)
}

/// Zeroes `grad` wherever `activation ≤ 0`. Works with either the ReLU
/// input or its output as `activation`.
pub fn relu_mask<T: Scalar>(activation: &[T], grad: &mut [T]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        if !(*a > T::zero()) {
            *g = T::zero();
        }
    }
}

pub fn concat_channels<T: Scalar>(xs: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
    let first = xs.first().ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
    let (n, h, w) = (first.n, first.h, first.w);
    let mut c = 0;
    for x in xs {
        if (x.n, x.h, x.w) != (n, h, w) {
            return Err(Error::DimensionMismatch(format!("cannot concatenate {:?} with {:?}", x.shape(), first.shape())));
        }
        c += x.c;
    }
    let mut data = Vec::with_capacity(n * c * h * w);
    for i in 0..n {
        for x in xs {
            let len = x.sample_len();
            data.extend_from_slice(&x.data[i * len..(i + 1) * len]);
        }
    }
    Ok(Tensor4 { n, c, h, w, data })
}

/// Backward of [`concat_channels`]: slices `grad` into the given channel counts.
pub fn split_channels<T: Scalar>(grad: &Tensor4<T>, sizes: &[usize]) -> Result<Vec<Tensor4<T>>> {
    if sizes.iter().sum::<usize>() != grad.c {
        return Err(Error::DimensionMismatch(format!("split sizes {sizes:?} do not sum to {}", grad.c)));
    }
    let plane = grad.h * grad.w;
    let mut outs: Vec<Tensor4<T>> = sizes.iter().map(|&c| Tensor4::zeros(grad.n, c, grad.h, grad.w)).collect();
    for i in 0..grad.n {
        let mut off = i * grad.c * plane;
        for o in outs.iter_mut() {
            let len = o.c * plane;
            o.data[i * len..(i + 1) * len].copy_from_slice(&grad.data[off..off + len]);
            off += len;
        }
    }
    Ok(outs)
}

/// Sub-pixel rearrangement: `out(n, c, y·r+i, x·r+j) = in(n, c·r² + i·r + j, y, x)`.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor4<T>, r: usize) -> Result<Tensor4<T>> {
    if r == 0 || x.c % (r * r) != 0 {
        return Err(Error::InvalidArgument(format!("{} channels not divisible by {r}²", x.c)));
    }
    let oc = x.c / (r * r);
    let (oh, ow) = (x.h * r, x.w * r);
    let mut out = Tensor4::zeros(x.n, oc, oh, ow);
    for n in 0..x.n {
        for c in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src_c = c * r * r + i * r + j;
                    for y in 0..x.h {
                        let src = x.index(n, src_c, y, 0);
                        let dst = out.index(n, c, y * r + i, 0);
                        for xx in 0..x.w {
                            out.data[dst + xx * r + j] = x.data[src + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`]; also its backward pass.
pub fn pixel_unshuffle<T: Scalar>(x: &Tensor4<T>, r: usize) -> Result<Tensor4<T>> {
    if r == 0 || x.h % r != 0 || x.w % r != 0 {
        return Err(Error::InvalidArgument(format!("spatial {}x{} not divisible by {r}", x.h, x.w)));
    }
    let (ih, iw) = (x.h / r, x.w / r);
    let mut out = Tensor4::zeros(x.n, x.c * r * r, ih, iw);
    for n in 0..x.n {
        for c in 0..x.c {
            for i in 0..r {
                for j in 0..r {
                    let dst_c = c * r * r + i * r + j;
                    for y in 0..ih {
                        let dst = out.index(n, dst_c, y, 0);
                        let src = x.index(n, c, y * r + i, 0);
                        for xx in 0..iw {
                            out.data[dst + xx] = x.data[src + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// 2×2 max pooling, stride 2; odd trailing rows/columns are dropped.
pub fn max_pool2<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let (oh, ow) = (x.h / 2, x.w / 2);
    Tensor4::from_fn(x.n, x.c, oh, ow, |n, c, y, xx| {
        let a = x.at(n, c, 2 * y, 2 * xx);
        let b = x.at(n, c, 2 * y, 2 * xx + 1);
        let d = x.at(n, c, 2 * y + 1, 2 * xx);
        let e = x.at(n, c, 2 * y + 1, 2 * xx + 1);
        a.max(b).max(d.max(e))
    })
}

/// Routes each pooled gradient to the first maximal input of its window.
pub fn max_pool2_backward<T: Scalar>(x: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    let (oh, ow) = (x.h / 2, x.w / 2);
    if grad_out.shape() != [x.n, x.c, oh, ow] {
        return Err(Error::DimensionMismatch(format!("pool gradient {:?} vs input {:?}", grad_out.shape(), x.shape())));
    }
    let mut g = Tensor4::zeros(x.n, x.c, x.h, x.w);
    for n in 0..x.n {
        for c in 0..x.c {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = (2 * y, 2 * xx);
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let (cy, cx) = (2 * y + dy, 2 * xx + dx);
                        if x.at(n, c, cy, cx) > x.at(n, c, best.0, best.1) {
                            best = (cy, cx);
                        }
                    }
                    let i = g.index(n, c, best.0, best.1);
                    g.data[i] += grad_out.at(n, c, y, xx);
                }
            }
        }
    }
    Ok(g)
}
