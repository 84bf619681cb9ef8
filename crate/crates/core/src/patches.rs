//! Training patch sampler.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::scalar::Scalar;

/// One aligned training pair. `(y0, x0)` is the HR crop's top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch<T = f32> {
    pub lr: LightField<T>,
    pub hr: LightField<T>,
    pub y0: usize,
    pub x0: usize,
}

/// Number of valid HR top-left positions `(rows, cols)` for a patch.
pub fn valid_positions(h: usize, w: usize, r: usize, patch: usize) -> Result<(usize, usize)> {
    let size = patch * r;
    if patch == 0 || h < size || w < size {
        return Err(Error::InvalidArgument(format!(
            "light field {h}x{w} is smaller than the {size}x{size} HR patch"
        )));
    }
    Ok((h - size + 1, w - size + 1))
}

/// Draws `batch` patches at uniform random positions. The HR patch is a
/// `patch·r` square crop and the LR patch is its bilinear downsample.
pub fn sample_patches_with<T: Scalar, R: Rng>(
    lf_hr: &LightField<T>,
    r: usize,
    patch: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<Patch<T>>> {
    let d = lf_hr.dims();
    let (ny, nx) = valid_positions(d.h, d.w, r, patch)?;
    let size = patch * r;
    (0..batch)
        .map(|_| {
            let y0 = rng.gen_range(0..ny);
            let x0 = rng.gen_range(0..nx);
            let hr = lf_hr.crop_spatial(y0, x0, size, size)?;
            let lr = hr.downsample_bilinear(r)?;
            Ok(Patch { lr, hr, y0, x0 })
        })
        .collect()
}

pub fn sample_patches<T: Scalar>(
    lf_hr: &LightField<T>,
    r: usize,
    patch: usize,
    batch: usize,
    seed: u64,
) -> Result<Vec<Patch<T>>> {
    sample_patches_with(lf_hr, r, patch, batch, &mut crate::rng(seed))
}
