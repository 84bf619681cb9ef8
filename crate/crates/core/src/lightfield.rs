//! The canonical light-field tensor and the operations that slice,
//! crop and resample it.
//!
//! Memory order is `(u, v, c, y, x)` row-major. The same type carries
//! network activations (arbitrary channel counts, unbounded values);
//! [`LightField::check_image`] enforces the stricter image invariants at
//! I/O boundaries.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::subspace::SubspacePair;
use crate::tensor::Tensor4;

/// Extents of a 5D light-field tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims5 {
    pub u: usize,
    pub v: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims5 {
    pub const fn new(u: usize, v: usize, c: usize, h: usize, w: usize) -> Self {
        Dims5 { u, v, c, h, w }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.u * self.v * self.c * self.h * self.w
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn views(&self) -> usize {
        self.u * self.v
    }

    #[inline]
    pub fn as_array(&self) -> [usize; 5] {
        [self.u, self.v, self.c, self.h, self.w]
    }

    #[inline]
    pub fn with_channels(self, c: usize) -> Self {
        Dims5 { c, ..self }
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize, c: usize, y: usize, x: usize) -> usize {
        (((u * self.v + v) * self.c + c) * self.h + y) * self.w + x
    }
}

impl std::fmt::Display for Dims5 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{},{})", self.u, self.v, self.c, self.h, self.w)
    }
}

/// 5D tensor of radiance samples (or activations) in `(u, v, c, y, x)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField<T = f32> {
    dims: Dims5,
    data: Vec<T>,
}

/// A single 2D multi-channel image `(c, y, x)`: one SAI or one EPI slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T = f32> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.h * self.w;
        &self.data[c * plane..(c + 1) * plane]
    }
}

impl<T: Scalar> LightField<T> {
    pub fn zeros(dims: Dims5) -> Self {
        LightField { dims, data: vec![T::zero(); dims.len()] }
    }

    pub fn filled(dims: Dims5, value: T) -> Self {
        LightField { dims, data: vec![value; dims.len()] }
    }

    pub fn from_vec(dims: Dims5, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "light field {dims} needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(LightField { dims, data })
    }

    pub fn from_fn(dims: Dims5, mut f: impl FnMut(usize, usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for u in 0..dims.u {
            for v in 0..dims.v {
                for c in 0..dims.c {
                    for y in 0..dims.h {
                        for x in 0..dims.w {
                            data.push(f(u, v, c, y, x));
                        }
                    }
                }
            }
        }
        LightField { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims5 {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.dims.index(u, v, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, c: usize, y: usize, x: usize, value: T) {
        let i = self.dims.index(u, v, c, y, x);
        self.data[i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Image invariants: `U, V, H, W ≥ 1`, `C ∈ {1, 3}`, all samples finite and in `[0, 1]`.
    pub fn check_image(&self) -> Result<()> {
        let d = self.dims;
        if d.u == 0 || d.v == 0 || d.h == 0 || d.w == 0 {
            return Err(Error::InvalidArgument(format!("empty light field {d}")));
        }
        if d.c != 1 && d.c != 3 {
            return Err(Error::InvalidArgument(format!("light field must have 1 or 3 channels, got {}", d.c)));
        }
        if let Some(bad) = self.data.iter().find(|v| !(v.is_finite() && **v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!("sample {bad} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> LightField<U> {
        LightField { dims: self.dims, data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    pub fn clamp_unit(mut self) -> Self {
        for v in &mut self.data {
            *v = v.max(T::zero()).min(T::one());
        }
        self
    }

    /// Views the tensor as `(U·V, C, H, W)`; this is the spatial sub-space
    /// layout and needs no data movement.
    pub fn into_views(self) -> Tensor4<T> {
        let d = self.dims;
        Tensor4 { n: d.u * d.v, c: d.c, h: d.h, w: d.w, data: self.data }
    }

    pub fn from_views(t: Tensor4<T>, u: usize, v: usize) -> Result<Self> {
        if t.n != u * v {
            return Err(Error::DimensionMismatch(format!("{} views cannot form a {u}x{v} grid", t.n)));
        }
        let dims = Dims5::new(u, v, t.c, t.h, t.w);
        Ok(LightField { dims, data: t.data })
    }

    pub fn extract_sai(&self, u: usize, v: usize) -> Result<Image<T>> {
        let d = self.dims;
        if u >= d.u || v >= d.v {
            return Err(Error::IndexOutOfRange(format!("view ({u},{v}) outside {}x{} grid", d.u, d.v)));
        }
        let len = d.c * d.h * d.w;
        let start = (u * d.v + v) * len;
        Ok(Image { c: d.c, h: d.h, w: d.w, data: self.data[start..start + len].to_vec() })
    }

    /// Writes `img` into view `(u, v)`; inverse of [`extract_sai`](Self::extract_sai).
    pub fn put_sai(&mut self, u: usize, v: usize, img: &Image<T>) -> Result<()> {
        let d = self.dims;
        if u >= d.u || v >= d.v {
            return Err(Error::IndexOutOfRange(format!("view ({u},{v}) outside {}x{} grid", d.u, d.v)));
        }
        if (img.c, img.h, img.w) != (d.c, d.h, d.w) {
            return Err(Error::DimensionMismatch(format!(
                "image ({},{},{}) does not fit view ({},{},{})",
                img.c, img.h, img.w, d.c, d.h, d.w
            )));
        }
        let len = d.c * d.h * d.w;
        let start = (u * d.v + v) * len;
        self.data[start..start + len].copy_from_slice(&img.data);
        Ok(())
    }

    /// 2D slice through one EPI sub-space at fixed complementary coordinates.
    ///
    /// `fixed` holds the two batch-axis coordinates in canonical order, e.g.
    /// `(v0, y0)` for [`SubspacePair::EpiUX`]. The result is single-channel
    /// with rows along the first convolution axis.
    pub fn extract_epi(&self, pair: SubspacePair, fixed: (usize, usize), c: usize) -> Result<Image<T>> {
        if !pair.is_epi() {
            return Err(Error::InvalidArgument(format!("{pair:?} is not an EPI sub-space")));
        }
        let d = self.dims;
        if c >= d.c {
            return Err(Error::IndexOutOfRange(format!("channel {c} >= {}", d.c)));
        }
        let ext = pair.source_extents(d);
        let (b0, b1) = pair.batch_axes();
        let (a0, a1) = pair.conv_axes();
        if fixed.0 >= ext[b0 as usize] || fixed.1 >= ext[b1 as usize] {
            return Err(Error::IndexOutOfRange(format!("fixed coordinates {fixed:?} outside {pair:?} batch extents")));
        }
        let (rows, cols) = (ext[a0 as usize], ext[a1 as usize]);
        let mut data = Vec::with_capacity(rows * cols);
        let mut coord = [0usize; 4];
        coord[b0 as usize] = fixed.0;
        coord[b1 as usize] = fixed.1;
        for i in 0..rows {
            for j in 0..cols {
                coord[a0 as usize] = i;
                coord[a1 as usize] = j;
                data.push(self.at(coord[0], coord[1], c, coord[2], coord[3]));
            }
        }
        Ok(Image { c: 1, h: rows, w: cols, data })
    }

    /// Removes `angular_margin` views and `spatial_margin` pixels from every border.
    pub fn crop_border(&self, angular_margin: usize, spatial_margin: usize) -> Result<Self> {
        let d = self.dims;
        let (a, s) = (angular_margin, spatial_margin);
        if 2 * a >= d.u.min(d.v) || 2 * s >= d.h.min(d.w) {
            return Err(Error::InvalidArgument(format!("margins ({a},{s}) too large for {d}")));
        }
        self.crop(a, a, d.u - 2 * a, d.v - 2 * a, s, s, d.h - 2 * s, d.w - 2 * s)
    }

    /// Spatial crop of every view to the window starting at `(y0, x0)`.
    pub fn crop_spatial(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        let d = self.dims;
        self.crop(0, 0, d.u, d.v, y0, x0, h, w)
    }

    #[allow(clippy::too_many_arguments)]
    fn crop(&self, u0: usize, v0: usize, nu: usize, nv: usize, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        let d = self.dims;
        if u0 + nu > d.u || v0 + nv > d.v || y0 + h > d.h || x0 + w > d.w {
            return Err(Error::IndexOutOfRange(format!(
                "crop u{u0}+{nu} v{v0}+{nv} y{y0}+{h} x{x0}+{w} outside {d}"
            )));
        }
        let out = Dims5::new(nu, nv, d.c, h, w);
        let mut data = Vec::with_capacity(out.len());
        for u in u0..u0 + nu {
            for v in v0..v0 + nv {
                for c in 0..d.c {
                    for y in y0..y0 + h {
                        let row = d.index(u, v, c, y, x0);
                        data.extend_from_slice(&self.data[row..row + w]);
                    }
                }
            }
        }
        Ok(LightField { dims: out, data })
    }

    /// Per-SAI bilinear downsampling by an integer factor, half-pixel
    /// centers, edge-clamped: source coordinate `(i + 0.5)·r − 0.5`.
    pub fn downsample_bilinear(&self, r: usize) -> Result<Self> {
        if !(2..=4).contains(&r) {
            return Err(Error::InvalidArgument(format!("downsample factor {r} not in 2..=4")));
        }
        let d = self.dims;
        if d.h % r != 0 || d.w % r != 0 {
            return Err(Error::InvalidArgument(format!("spatial dims {}x{} not divisible by {r}", d.h, d.w)));
        }
        let scale = r as f64;
        Ok(self.resample(d.h / r, d.w / r, |i| (i as f64 + 0.5) * scale - 0.5))
    }

    /// Bilinear upsampling by `r` with the same half-pixel convention
    /// (source coordinate `(i + 0.5)/r − 0.5`).
    pub fn upsample_bilinear(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("upsample factor must be positive".into()));
        }
        let d = self.dims;
        let scale = r as f64;
        Ok(self.resample(d.h * r, d.w * r, |i| (i as f64 + 0.5) / scale - 0.5))
    }

    fn resample(&self, oh: usize, ow: usize, src: impl Fn(usize) -> f64) -> Self {
        let d = self.dims;
        let taps = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
            (0..n_out)
                .map(|i| {
                    let s = src(i).clamp(0.0, (n_in - 1) as f64);
                    let lo = s.floor() as usize;
                    let hi = (lo + 1).min(n_in - 1);
                    (lo, hi, s - lo as f64)
                })
                .collect()
        };
        let ty = taps(oh, d.h);
        let tx = taps(ow, d.w);
        let out = Dims5::new(d.u, d.v, d.c, oh, ow);
        let plane = d.h * d.w;
        let mut data = Vec::with_capacity(out.len());
        for p in self.data.chunks_exact(plane) {
            for &(y0, y1, fy) in &ty {
                for &(x0, x1, fx) in &tx {
                    let a = p[y0 * d.w + x0].as_f64();
                    let b = p[y0 * d.w + x1].as_f64();
                    let c = p[y1 * d.w + x0].as_f64();
                    let e = p[y1 * d.w + x1].as_f64();
                    let top = a + (b - a) * fx;
                    let bot = c + (e - c) * fx;
                    data.push(T::of(top + (bot - top) * fy));
                }
            }
        }
        LightField { dims: out, data }
    }

    /// Channel-wise concatenation in argument order.
    pub fn concat_channels(parts: &[&LightField<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let d0 = first.dims;
        let mut c_total = 0;
        for p in parts {
            let d = p.dims;
            if (d.u, d.v, d.h, d.w) != (d0.u, d0.v, d0.h, d0.w) {
                return Err(Error::DimensionMismatch(format!("cannot concatenate {d} with {d0}")));
            }
            c_total += d.c;
        }
        let out = d0.with_channels(c_total);
        let plane = d0.h * d0.w;
        let mut data = Vec::with_capacity(out.len());
        for view in 0..d0.views() {
            for p in parts {
                let len = p.dims.c * plane;
                data.extend_from_slice(&p.data[view * len..(view + 1) * len]);
            }
        }
        Ok(LightField { dims: out, data })
    }

    /// Inverse of [`concat_channels`](Self::concat_channels).
    pub fn split_channels(&self, sizes: &[usize]) -> Result<Vec<Self>> {
        let d = self.dims;
        if sizes.iter().sum::<usize>() != d.c {
            return Err(Error::DimensionMismatch(format!("split sizes {sizes:?} do not sum to {}", d.c)));
        }
        let plane = d.h * d.w;
        let mut outs: Vec<Vec<T>> = sizes.iter().map(|c| Vec::with_capacity(d.views() * c * plane)).collect();
        for view in self.data.chunks_exact(d.c * plane) {
            let mut off = 0;
            for (o, &c) in outs.iter_mut().zip(sizes) {
                o.extend_from_slice(&view[off..off + c * plane]);
                off += c * plane;
            }
        }
        Ok(outs
            .into_iter()
            .zip(sizes)
            .map(|(data, &c)| LightField { dims: d.with_channels(c), data })
            .collect())
    }

    pub fn add_assign(&mut self, other: &LightField<T>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("cannot add {} to {}", other.dims, self.dims)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }
}
