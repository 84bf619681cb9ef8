//! The six 2D sub-spaces of a light field and the reshapes that expose
//! each one to a 2D convolution.
//!
//! A view of pair `(d1, d2)` has layout `(b, c, d1, d2)` where the batch
//! index merges the two remaining axes in canonical `(u, v, y, x)` order:
//! `b = d3·|D4| + d4`.

use crate::error::{Error, Result};
use crate::lightfield::{Dims5, LightField};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// One of the four light-field coordinates; discriminants are canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    U = 0,
    V = 1,
    Y = 2,
    X = 3,
}

impl Axis {
    pub fn name(self) -> char {
        match self {
            Axis::U => 'u',
            Axis::V => 'v',
            Axis::Y => 'y',
            Axis::X => 'x',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubspacePair {
    /// `(y, x)`: each SAI convolved independently.
    Spatial,
    /// `(u, v)`: each pixel's angular patch.
    Angular,
    EpiUX,
    EpiVY,
    EpiUY,
    EpiVX,
}

impl SubspacePair {
    pub const ALL: [SubspacePair; 6] = [
        SubspacePair::Spatial,
        SubspacePair::Angular,
        SubspacePair::EpiUX,
        SubspacePair::EpiVY,
        SubspacePair::EpiUY,
        SubspacePair::EpiVX,
    ];

    /// Convolution axes `(d1, d2)`.
    pub fn conv_axes(self) -> (Axis, Axis) {
        match self {
            SubspacePair::Spatial => (Axis::Y, Axis::X),
            SubspacePair::Angular => (Axis::U, Axis::V),
            SubspacePair::EpiUX => (Axis::U, Axis::X),
            SubspacePair::EpiVY => (Axis::V, Axis::Y),
            SubspacePair::EpiUY => (Axis::U, Axis::Y),
            SubspacePair::EpiVX => (Axis::V, Axis::X),
        }
    }

    /// Merged batch axes `(d3, d4)` in canonical order.
    pub fn batch_axes(self) -> (Axis, Axis) {
        match self {
            SubspacePair::Spatial => (Axis::U, Axis::V),
            SubspacePair::Angular => (Axis::Y, Axis::X),
            SubspacePair::EpiUX => (Axis::V, Axis::Y),
            SubspacePair::EpiVY => (Axis::U, Axis::X),
            SubspacePair::EpiUY => (Axis::V, Axis::X),
            SubspacePair::EpiVX => (Axis::U, Axis::Y),
        }
    }

    pub fn is_epi(self) -> bool {
        !matches!(self, SubspacePair::Spatial | SubspacePair::Angular)
    }

    /// Angular-spatial mixing pairs are inter-domain connections.
    pub fn is_inter_domain(self) -> bool {
        self.is_epi()
    }

    /// Short label such as `"(u, x)"`, used in shape traces.
    pub fn label(self) -> String {
        let (a, b) = self.conv_axes();
        // the spatial pair is written (x, y) in the architecture listing
        if self == SubspacePair::Spatial {
            return "(x, y)".into();
        }
        format!("({}, {})", a.name(), b.name())
    }

    /// Short CLI token: `ux`, `vy`, `uy`, `vx`, `xy`, `uv`.
    pub fn token(self) -> &'static str {
        match self {
            SubspacePair::Spatial => "xy",
            SubspacePair::Angular => "uv",
            SubspacePair::EpiUX => "ux",
            SubspacePair::EpiVY => "vy",
            SubspacePair::EpiUY => "uy",
            SubspacePair::EpiVX => "vx",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        SubspacePair::ALL.into_iter().find(|p| p.token() == s)
    }

    /// Extents of `(u, v, y, x)` for tensors of `dims`.
    #[inline]
    pub fn source_extents(self, dims: Dims5) -> [usize; 4] {
        [dims.u, dims.v, dims.h, dims.w]
    }

    /// `(batch, dim1, dim2)` of the view of a tensor with `dims`.
    pub fn view_shape(self, dims: Dims5) -> (usize, usize, usize) {
        let e = self.source_extents(dims);
        let (b0, b1) = self.batch_axes();
        let (a0, a1) = self.conv_axes();
        (e[b0 as usize] * e[b1 as usize], e[a0 as usize], e[a1 as usize])
    }

    /// Source strides and extents in view order `(b0, b1, c, d1, d2)`.
    fn permutation(self, dims: Dims5) -> ([usize; 5], [usize; 5]) {
        let axis_stride = [dims.v * dims.c * dims.h * dims.w, dims.c * dims.h * dims.w, dims.w, 1];
        let ext = self.source_extents(dims);
        let c_stride = dims.h * dims.w;
        let (b0, b1) = self.batch_axes();
        let (a0, a1) = self.conv_axes();
        let order = [b0 as usize, b1 as usize, usize::MAX, a0 as usize, a1 as usize];
        let mut strides = [0; 5];
        let mut extents = [0; 5];
        for (k, &ax) in order.iter().enumerate() {
            if ax == usize::MAX {
                strides[k] = c_stride;
                extents[k] = dims.c;
            } else {
                strides[k] = axis_stride[ax];
                extents[k] = ext[ax];
            }
        }
        (strides, extents)
    }
}

/// A light field reshaped for 2D convolution on one sub-space.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewTensor<T = f32> {
    pub pair: SubspacePair,
    pub source: Dims5,
    pub tensor: Tensor4<T>,
}

impl<T: Scalar> ViewTensor<T> {
    /// Wraps a `(b, c, d1, d2)` tensor, checking it matches `source`
    /// (the channel count of `source` is taken from the tensor).
    pub fn new(pair: SubspacePair, source: Dims5, tensor: Tensor4<T>) -> Result<Self> {
        let source = source.with_channels(tensor.c);
        let (b, d1, d2) = pair.view_shape(source);
        if (tensor.n, tensor.h, tensor.w) != (b, d1, d2) {
            return Err(Error::DimensionMismatch(format!(
                "view {:?} of {source} must be ({b},_,{d1},{d2}), got {:?}",
                pair,
                tensor.shape()
            )));
        }
        Ok(ViewTensor { pair, source, tensor })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.tensor.shape()
    }
}

/// Reshapes `t` so that `pair`'s two axes become the convolution axes.
pub fn to_view<T: Scalar>(t: &LightField<T>, pair: SubspacePair) -> ViewTensor<T> {
    let dims = t.dims();
    let (b, d1, d2) = pair.view_shape(dims);
    let tensor = if pair == SubspacePair::Spatial {
        Tensor4 { n: b, c: dims.c, h: d1, w: d2, data: t.data().to_vec() }
    } else {
        let (s, e) = pair.permutation(dims);
        let src = t.data();
        let mut data = Vec::with_capacity(dims.len());
        for i0 in 0..e[0] {
            for i1 in 0..e[1] {
                for i2 in 0..e[2] {
                    for i3 in 0..e[3] {
                        let base = i0 * s[0] + i1 * s[1] + i2 * s[2] + i3 * s[3];
                        data.extend((0..e[4]).map(|i4| src[base + i4 * s[4]]));
                    }
                }
            }
        }
        Tensor4 { n: b, c: dims.c, h: d1, w: d2, data }
    };
    ViewTensor { pair, source: dims, tensor }
}

/// Exact inverse of [`to_view`].
pub fn from_view<T: Scalar>(vt: &ViewTensor<T>) -> Result<LightField<T>> {
    let dims = vt.source;
    let (b, d1, d2) = vt.pair.view_shape(dims);
    let t = &vt.tensor;
    if (t.n, t.c, t.h, t.w) != (b, dims.c, d1, d2) {
        return Err(Error::DimensionMismatch(format!(
            "view shape {:?} inconsistent with source {dims} for {:?}",
            t.shape(),
            vt.pair
        )));
    }
    if vt.pair == SubspacePair::Spatial {
        return LightField::from_vec(dims, t.data.clone());
    }
    Ok(scatter(vt.pair, dims, &t.data))
}

/// Consuming variant of [`from_view`] that avoids a copy for the spatial pair.
pub fn into_field<T: Scalar>(vt: ViewTensor<T>) -> Result<LightField<T>> {
    if vt.pair == SubspacePair::Spatial {
        let dims = vt.source;
        return LightField::from_vec(dims, vt.tensor.data);
    }
    from_view(&vt)
}

fn scatter<T: Scalar>(pair: SubspacePair, dims: Dims5, src: &[T]) -> LightField<T> {
    let (s, e) = pair.permutation(dims);
    let mut out = vec![T::zero(); dims.len()];
    let mut k = 0;
    for i0 in 0..e[0] {
        for i1 in 0..e[1] {
            for i2 in 0..e[2] {
                for i3 in 0..e[3] {
                    let base = i0 * s[0] + i1 * s[1] + i2 * s[2] + i3 * s[3];
                    for i4 in 0..e[4] {
                        out[base + i4 * s[4]] = src[k];
                        k += 1;
                    }
                }
            }
        }
    }
    LightField::from_vec(dims, out).expect("scatter preserves length")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape_of(d: Dims5, p: SubspacePair) -> [usize; 4] {
        to_view(&LightField::<f32>::zeros(d), p).shape()
    }

    #[test]
    fn architecture_listing_shapes() {
        assert_eq!(shape_of(Dims5::new(8, 8, 3, 32, 32), SubspacePair::Spatial), [64, 3, 32, 32]);
        let feat = Dims5::new(8, 8, 32, 32, 32);
        assert_eq!(shape_of(feat, SubspacePair::Angular), [1024, 32, 8, 8]);
        for p in [SubspacePair::EpiUX, SubspacePair::EpiVY, SubspacePair::EpiUY, SubspacePair::EpiVX] {
            assert_eq!(shape_of(feat, p), [256, 32, 8, 32], "{p:?}");
        }
    }

    #[test]
    fn singleton_view() {
        let lf = LightField::from_vec(Dims5::new(1, 1, 1, 1, 1), vec![4.5f64]).unwrap();
        for p in SubspacePair::ALL {
            let vt = to_view(&lf, p);
            assert_eq!(vt.shape(), [1, 1, 1, 1]);
            assert_eq!(from_view(&vt).unwrap(), lf);
        }
    }

    #[test]
    fn epi_ux_batch_index() {
        let d = Dims5::new(3, 4, 2, 5, 6);
        let lf = LightField::<f64>::from_fn(d, |u, v, c, y, x| (u * 10000 + v * 1000 + c * 100 + y * 10 + x) as f64);
        let vt = to_view(&lf, SubspacePair::EpiUX);
        // element (u,v,c,y,x) at (b = v·H + y, c, u, x)
        for (u, v, c, y, x) in [(0, 0, 0, 0, 0), (2, 3, 1, 4, 5), (1, 2, 0, 3, 1)] {
            assert_eq!(vt.tensor.at(v * d.h + y, c, u, x), lf.at(u, v, c, y, x));
        }
    }

    #[test]
    fn angular_from_view_dims() {
        let t = Tensor4::<f32>::zeros(1024, 32, 8, 8);
        let vt = ViewTensor::new(SubspacePair::Angular, Dims5::new(8, 8, 32, 32, 32), t).unwrap();
        assert_eq!(from_view(&vt).unwrap().dims(), Dims5::new(8, 8, 32, 32, 32));
    }

    #[test]
    fn inconsistent_source_rejected() {
        let t = Tensor4::<f32>::zeros(10, 2, 3, 3);
        assert!(ViewTensor::new(SubspacePair::Angular, Dims5::new(3, 3, 2, 2, 5), t.clone()).is_ok());
        let bad = ViewTensor { pair: SubspacePair::Angular, source: Dims5::new(3, 3, 2, 2, 4), tensor: t };
        assert!(from_view(&bad).is_err());
    }

    #[test]
    fn batch_and_conv_axes_partition() {
        for p in SubspacePair::ALL {
            let (a, b) = p.conv_axes();
            let (c, d) = p.batch_axes();
            let mut all = [a as usize, b as usize, c as usize, d as usize];
            all.sort();
            assert_eq!(all, [0, 1, 2, 3]);
            assert!((c as usize) < (d as usize));
        }
    }
}
