//! Whole-image inference with optional spatial tiling.

use crate::dknet::DKNet;
use crate::error::{Error, Result};
use crate::lightfield::{Dims5, LightField};

/// Anything that maps an LR light field to an HR one at a fixed scale.
pub trait SuperResolver: Sync {
    fn scale(&self) -> usize;

    /// Required angular resolution, if the model is tied to one.
    fn angular(&self) -> Option<(usize, usize)>;

    /// Raw forward pass on a full light field or a tile of it.
    fn forward_lr(&self, lf: &LightField<f32>) -> Result<LightField<f32>>;

    /// Rough working-set size per LR spatial pixel, used to pick tile sizes.
    fn bytes_per_lr_pixel(&self, views: usize) -> usize {
        views * 64
    }
}

impl SuperResolver for DKNet<f32> {
    fn scale(&self) -> usize {
        self.config.scale
    }

    fn angular(&self) -> Option<(usize, usize)> {
        Some(self.config.angular)
    }

    fn forward_lr(&self, lf: &LightField<f32>) -> Result<LightField<f32>> {
        self.forward(lf)
    }

    fn bytes_per_lr_pixel(&self, views: usize) -> usize {
        let c = &self.config;
        let widest = (0..c.depth).map(|i| c.kernel_in_channels(i)).max().unwrap_or(0);
        // Live kernel outputs + final concat + one im2col-sized buffer + output.
        let floats = c.feat_ch * c.depth + c.concat_channels() + 9 * widest + 2 * c.shuffle_ch();
        views * floats * std::mem::size_of::<f32>()
    }
}

/// Bilinear upsampling of the LR input; a reference point for evaluation.
#[derive(Clone, Copy, Debug)]
pub struct BilinearBaseline {
    pub scale: usize,
}

impl SuperResolver for BilinearBaseline {
    fn scale(&self) -> usize {
        self.scale
    }

    fn angular(&self) -> Option<(usize, usize)> {
        None
    }

    fn forward_lr(&self, lf: &LightField<f32>) -> Result<LightField<f32>> {
        lf.upsample_bilinear(self.scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferOptions {
    /// LR pixels of context added on each side of a tile.
    pub overlap: usize,
    /// Fixed LR tile edge (without overlap); `None` sizes tiles from `max_bytes`.
    pub tile: Option<usize>,
    pub max_bytes: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions { overlap: 8, tile: None, max_bytes: 1 << 30 }
    }
}

/// Super-resolves with default options and clamps the result to `[0, 1]`.
pub fn super_resolve(model: &dyn SuperResolver, lf: &LightField<f32>) -> Result<LightField<f32>> {
    super_resolve_with(model, lf, &InferOptions::default())
}

pub fn super_resolve_with(model: &dyn SuperResolver, lf: &LightField<f32>, opts: &InferOptions) -> Result<LightField<f32>> {
    let d = lf.dims();
    if let Some((u, v)) = model.angular() {
        if (d.u, d.v) != (u, v) {
            return Err(Error::DimensionMismatch(format!(
                "model expects {u}x{v} views, light field has {}x{}",
                d.u, d.v
            )));
        }
    }
    let tile = match opts.tile {
        Some(t) => t.max(1),
        None => auto_tile(model.bytes_per_lr_pixel(d.views()), d.h, d.w, opts),
    };
    let out = if tile >= d.h && tile >= d.w { model.forward_lr(lf)? } else { tiled(model, lf, tile, opts.overlap)? };
    Ok(out.clamp_unit())
}

fn auto_tile(bpp: usize, h: usize, w: usize, opts: &InferOptions) -> usize {
    let bpp = bpp.max(1);
    if h * w * bpp <= opts.max_bytes {
        return h.max(w);
    }
    let side = ((opts.max_bytes / bpp) as f64).sqrt() as usize;
    side.saturating_sub(2 * opts.overlap).max(8)
}

fn tiled(model: &dyn SuperResolver, lf: &LightField<f32>, tile: usize, overlap: usize) -> Result<LightField<f32>> {
    let d = lf.dims();
    let r = model.scale();
    let mut out: Option<LightField<f32>> = None;
    for y0 in (0..d.h).step_by(tile) {
        let y1 = (y0 + tile).min(d.h);
        for x0 in (0..d.w).step_by(tile) {
            let x1 = (x0 + tile).min(d.w);
            let (iy0, iy1) = (y0.saturating_sub(overlap), (y1 + overlap).min(d.h));
            let (ix0, ix1) = (x0.saturating_sub(overlap), (x1 + overlap).min(d.w));
            let input = lf.crop_spatial(iy0, ix0, iy1 - iy0, ix1 - ix0)?;
            let sr = model.forward_lr(&input)?;
            let sd = sr.dims();
            let dst = out.get_or_insert_with(|| LightField::zeros(Dims5::new(d.u, d.v, sd.c, d.h * r, d.w * r)));
            let (oy, ox) = ((y0 - iy0) * r, (x0 - ix0) * r);
            let (th, tw) = ((y1 - y0) * r, (x1 - x0) * r);
            let od = dst.dims();
            let data = dst.data_mut();
            for u in 0..d.u {
                for v in 0..d.v {
                    for c in 0..sd.c {
                        for y in 0..th {
                            let s = sd.index(u, v, c, oy + y, ox);
                            let t = od.index(u, v, c, y0 * r + y, x0 * r);
                            data[t..t + tw].copy_from_slice(&sr.data()[s..s + tw]);
                        }
                    }
                }
            }
        }
    }
    out.ok_or_else(|| Error::InvalidArgument("empty light field".into()))
}
