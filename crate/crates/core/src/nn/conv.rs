use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Output columns each GEMM should see at minimum; small views (angular
/// patches, 1×1 outputs) are grouped across samples up to this width.
const MIN_GEMM_COLS: usize = 256;
/// Fixed partition of the weight-gradient reduction; independent of the
/// thread count so results are bit-reproducible.
const GRAD_CHUNKS: usize = 8;
/// Row block of the matrix-product path.
const DENSE_ROWS: usize = 256;

/// 2D convolution layer with cross-correlation semantics and zero padding.
///
/// Weights are `(out_ch, in_ch, kh, kw)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2D<T = f32> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients of one [`Conv2D`]'s parameters, same layout as the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrads<T> {
    pub fn zeros_like(layer: &Conv2D<T>) -> Self {
        ConvGrads { weight: vec![T::zero(); layer.weight.len()], bias: vec![T::zero(); layer.bias.len()] }
    }

    pub fn add_scaled(&mut self, other: &ConvGrads<T>, scale: T) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += *b * scale;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += *b * scale;
        }
    }
}

impl<T: Scalar> Conv2D<T> {
    /// Zero-initialized layer.
    pub fn new(in_ch: usize, out_ch: usize, kernel: (usize, usize), stride: (usize, usize), pad: (usize, usize)) -> Self {
        let (kh, kw) = kernel;
        Conv2D {
            in_ch,
            out_ch,
            kh,
            kw,
            stride,
            pad,
            weight: vec![T::zero(); out_ch * in_ch * kh * kw],
            bias: vec![T::zero(); out_ch],
        }
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, bias zero.
    pub fn seeded<R: Rng>(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::new(in_ch, out_ch, kernel, stride, pad);
        let bound = (6.0 / (in_ch * kernel.0 * kernel.1) as f64).sqrt();
        for w in &mut layer.weight {
            *w = T::of(rng.gen_range(-bound..bound));
        }
        layer
    }

    /// 3×3, stride 1, pad 1: the shape of every sub-space stage.
    pub fn same3x3<R: Rng>(in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self::seeded(in_ch, out_ch, (3, 3), (1, 1), (1, 1), rng)
    }

    pub fn param_count(&self) -> usize {
        self.out_ch * self.in_ch * self.kh * self.kw + self.out_ch
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (sh, sw) = self.stride;
        let (ph, pw) = self.pad;
        if sh == 0 || sw == 0 {
            return Err(Error::InvalidArgument("convolution stride must be positive".into()));
        }
        if h + 2 * ph < self.kh || w + 2 * pw < self.kw {
            return Err(Error::DimensionMismatch(format!(
                "input {h}x{w} (pad {ph},{pw}) smaller than kernel {}x{}",
                self.kh, self.kw
            )));
        }
        Ok(((h + 2 * ph - self.kh) / sh + 1, (w + 2 * pw - self.kw) / sw + 1))
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<(usize, usize)> {
        if x.c != self.in_ch {
            return Err(Error::DimensionMismatch(format!(
                "convolution expects {} input channels, got {}",
                self.in_ch, x.c
            )));
        }
        self.output_size(x.h, x.w)
    }

    fn group_size(&self, n: usize, cols: usize) -> usize {
        MIN_GEMM_COLS.div_ceil(cols.max(1)).clamp(1, n.max(1))
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (oh, ow) = self.check_input(x)?;
        let p = oh * ow;
        let k = self.in_ch * self.kh * self.kw;
        let mut out = Tensor4::zeros(x.n, self.out_ch, oh, ow);
        if x.n == 0 || p == 0 {
            return Ok(out);
        }
        if self.covers_input(x.h, x.w) {
            self.forward_dense(x, &mut out.data);
            return Ok(out);
        }
        let geo = self.geometry(x.h, x.w, oh, ow);
        let g = self.group_size(x.n, p);
        let in_len = x.sample_len();
        let out_len = self.out_ch * p;
        out.data.par_chunks_mut(g * out_len).enumerate().for_each_init(
            || (Vec::new(), Vec::new()),
            |(col, tmp), (gi, chunk)| {
                let gs = chunk.len() / out_len;
                let s0 = gi * g;
                let width = gs * p;
                col.clear();
                col.resize(k * width, T::zero());
                for s in 0..gs {
                    let xs = &x.data[(s0 + s) * in_len..(s0 + s + 1) * in_len];
                    self.im2col(xs, &geo, col, width, s * p);
                }
                if gs == 1 {
                    T::gemm(self.out_ch, k, p, &self.weight, false, col, false, chunk, false);
                } else {
                    tmp.resize(self.out_ch * width, T::zero());
                    T::gemm(self.out_ch, k, width, &self.weight, false, col, false, tmp, false);
                    // (co, s, p) -> (s, co, p)
                    for co in 0..self.out_ch {
                        let src = &tmp[co * width..(co + 1) * width];
                        for (s, part) in src.chunks_exact(p).enumerate() {
                            let base = s * out_len + co * p;
                            for (i, &v) in part.iter().enumerate() {
                                chunk[base + i] = v;
                            }
                        }
                    }
                }
                for (j, block) in chunk.chunks_exact_mut(p).enumerate() {
                    let b = self.bias[j % self.out_ch];
                    for v in block {
                        *v += b;
                    }
                }
            },
        );
        Ok(out)
    }

    /// Gradients of `⟨grad_out, forward(x)⟩` with respect to input, weights and bias.
    pub fn backward(&self, x: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<(Tensor4<T>, ConvGrads<T>)> {
        let (oh, ow) = self.check_input(x)?;
        if grad_out.shape() != [x.n, self.out_ch, oh, ow] {
            return Err(Error::DimensionMismatch(format!(
                "gradient shape {:?} does not match output ({},{},{oh},{ow})",
                grad_out.shape(),
                x.n,
                self.out_ch
            )));
        }
        let p = oh * ow;
        let k = self.in_ch * self.kh * self.kw;
        let in_len = x.sample_len();
        let out_len = self.out_ch * p;
        let mut grad_x = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let mut grads = ConvGrads::zeros_like(self);
        if x.n == 0 || p == 0 {
            return Ok((grad_x, grads));
        }

        for s in 0..x.n {
            for co in 0..self.out_ch {
                let row = &grad_out.data[s * out_len + co * p..s * out_len + (co + 1) * p];
                grads.bias[co] += row.iter().copied().sum::<T>();
            }
        }
        if self.covers_input(x.h, x.w) {
            self.backward_dense(x, grad_out, &mut grad_x.data, &mut grads.weight);
            return Ok((grad_x, grads));
        }

        let geo = self.geometry(x.h, x.w, oh, ow);
        let g = self.group_size(x.n, p);
        let groups = x.n.div_ceil(g);
        let groups_per_chunk = groups.div_ceil(GRAD_CHUNKS);
        let samples_per_chunk = groups_per_chunk * g;
        let partials: Vec<Vec<T>> = grad_x
            .data
            .par_chunks_mut(samples_per_chunk * in_len)
            .enumerate()
            .map(|(ci, gx_chunk)| {
                let mut gw = vec![T::zero(); self.weight.len()];
                let mut col = Vec::new();
                let mut gtmp = Vec::new();
                let chunk_samples = gx_chunk.len() / in_len;
                let first = ci * samples_per_chunk;
                let mut s_local = 0;
                while s_local < chunk_samples {
                    let gs = g.min(chunk_samples - s_local);
                    let width = gs * p;
                    col.clear();
                    col.resize(k * width, T::zero());
                    gtmp.resize(self.out_ch * width, T::zero());
                    for s in 0..gs {
                        let idx = first + s_local + s;
                        let xs = &x.data[idx * in_len..(idx + 1) * in_len];
                        self.im2col(xs, &geo, &mut col, width, s * p);
                        for co in 0..self.out_ch {
                            let src = &grad_out.data[idx * out_len + co * p..idx * out_len + (co + 1) * p];
                            gtmp[co * width + s * p..co * width + (s + 1) * p].copy_from_slice(src);
                        }
                    }
                    // dW += G · colᵀ
                    T::gemm(self.out_ch, width, k, &gtmp, false, &col, true, &mut gw, true);
                    // dcol = Wᵀ · G
                    T::gemm(k, self.out_ch, width, &self.weight, true, &gtmp, false, &mut col, false);
                    for s in 0..gs {
                        let off = (s_local + s) * in_len;
                        self.col2im(&col, &geo, width, s * p, &mut gx_chunk[off..off + in_len]);
                    }
                    s_local += gs;
                }
                gw
            })
            .collect();
        for part in &partials {
            for (a, b) in grads.weight.iter_mut().zip(part) {
                *a += *b;
            }
        }
        Ok((grad_x, grads))
    }

    /// A kernel spanning the whole unpadded input yields one output pixel
    /// per sample, and the convolution is a plain matrix product.
    fn covers_input(&self, h: usize, w: usize) -> bool {
        self.pad == (0, 0) && (self.kh, self.kw) == (h, w)
    }

    /// `out (n × out_ch) = X (n × k) · Wᵀ + b`.
    fn forward_dense(&self, x: &Tensor4<T>, out: &mut [T]) {
        let k = x.sample_len();
        let oc = self.out_ch;
        out.par_chunks_mut(DENSE_ROWS * oc).enumerate().for_each(|(ci, chunk)| {
            let rows = chunk.len() / oc;
            let xs = &x.data[ci * DENSE_ROWS * k..(ci * DENSE_ROWS + rows) * k];
            T::gemm(rows, k, oc, xs, false, &self.weight, true, chunk, false);
            for row in chunk.chunks_exact_mut(oc) {
                for (v, &b) in row.iter_mut().zip(&self.bias) {
                    *v += b;
                }
            }
        });
    }

    /// `dX = G · W` and `dW = Gᵀ · X`, the latter reduced over a fixed
    /// partition of the samples.
    fn backward_dense(&self, x: &Tensor4<T>, g: &Tensor4<T>, gx: &mut [T], gw: &mut [T]) {
        let k = x.sample_len();
        let oc = self.out_ch;
        let rows_per_chunk = x.n.div_ceil(GRAD_CHUNKS).max(1);
        let partials: Vec<Vec<T>> = gx
            .par_chunks_mut(rows_per_chunk * k)
            .enumerate()
            .map(|(ci, gx_chunk)| {
                let rows = gx_chunk.len() / k;
                let r0 = ci * rows_per_chunk;
                let gs = &g.data[r0 * oc..(r0 + rows) * oc];
                let xs = &x.data[r0 * k..(r0 + rows) * k];
                T::gemm(rows, oc, k, gs, false, &self.weight, false, gx_chunk, false);
                let mut part = vec![T::zero(); oc * k];
                T::gemm(oc, rows, k, gs, true, xs, false, &mut part, false);
                part
            })
            .collect();
        for part in &partials {
            for (a, b) in gw.iter_mut().zip(part) {
                *a += *b;
            }
        }
    }

    fn geometry(&self, h: usize, w: usize, oh: usize, ow: usize) -> Geometry {
        Geometry {
            h,
            w,
            oh,
            ow,
            rows: (0..self.kh).map(|ki| valid_range(oh, h, self.stride.0, ki, self.pad.0)).collect(),
            cols: (0..self.kw).map(|kj| valid_range(ow, w, self.stride.1, kj, self.pad.1)).collect(),
        }
    }

    /// Unfolds one sample into columns `[off, off + oh·ow)` of a
    /// `(in_ch·kh·kw) × width` matrix. Padding positions are not written,
    /// so `col` must be zeroed beforehand.
    fn im2col(&self, xs: &[T], g: &Geometry, col: &mut [T], width: usize, off: usize) {
        let (sh, sw) = self.stride;
        let (h, w, ow) = (g.h, g.w, g.ow);
        for ci in 0..self.in_ch {
            let plane = &xs[ci * h * w..(ci + 1) * h * w];
            for ki in 0..self.kh {
                let (ylo, yhi) = g.rows[ki];
                for kj in 0..self.kw {
                    let (lo, hi) = g.cols[kj];
                    if lo >= hi || ylo >= yhi {
                        continue;
                    }
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut col[row * width + off..row * width + off + g.oh * ow];
                    let first = lo * sw + kj - self.pad.1;
                    for oy in ylo..yhi {
                        let iy = oy * sh + ki - self.pad.0;
                        let src = &plane[iy * w + first..(iy + 1) * w];
                        let line = &mut dst[oy * ow + lo..oy * ow + hi];
                        if sw == 1 {
                            line.copy_from_slice(&src[..hi - lo]);
                        } else {
                            for (v, &x) in line.iter_mut().zip(src.iter().step_by(sw)) {
                                *v = x;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters columns back, accumulating.
    fn col2im(&self, col: &[T], g: &Geometry, width: usize, off: usize, gx: &mut [T]) {
        let (sh, sw) = self.stride;
        let (h, w, ow) = (g.h, g.w, g.ow);
        for ci in 0..self.in_ch {
            let plane = &mut gx[ci * h * w..(ci + 1) * h * w];
            for ki in 0..self.kh {
                let (ylo, yhi) = g.rows[ki];
                for kj in 0..self.kw {
                    let (lo, hi) = g.cols[kj];
                    if lo >= hi || ylo >= yhi {
                        continue;
                    }
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &col[row * width + off..row * width + off + g.oh * ow];
                    let first = lo * sw + kj - self.pad.1;
                    for oy in ylo..yhi {
                        let iy = oy * sh + ki - self.pad.0;
                        let dst = &mut plane[iy * w + first..(iy + 1) * w];
                        let line = &src[oy * ow + lo..oy * ow + hi];
                        for (d, &v) in dst.iter_mut().step_by(sw).zip(line) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

/// Valid output ranges of every kernel row and column for one input size.
struct Geometry {
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    rows: Vec<(usize, usize)>,
    cols: Vec<(usize, usize)>,
}

/// Outputs `[lo, hi)` whose input index `o·stride + k − pad` lies in `[0, w)`.
fn valid_range(ow: usize, w: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    if w + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((w + pad - k - 1) / stride + 1).min(ow);
    (lo.min(hi), hi)
}
