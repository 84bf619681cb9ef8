//! SAI-grid images: all views tiled in one picture, view `(u, v)` at grid
//! row `u`, column `v`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::lightfield::{Dims5, Image, LightField};

/// Converts a decoded grid image into a light field with samples in `[0, 1]`.
pub fn grid_to_light_field(img: &DynamicImage, u: usize, v: usize) -> Result<LightField<f32>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if u == 0 || v == 0 || h % u != 0 || w % v != 0 {
        return Err(Error::InvalidArgument(format!("{w}x{h} image cannot be split into a {u}x{v} view grid")));
    }
    let (sh, sw) = (h / u, w / v);
    let gray = matches!(img.color().channel_count(), 1 | 2);
    let c = if gray { 1 } else { 3 };
    let dims = Dims5::new(u, v, c, sh, sw);
    let lf = if gray {
        let buf = img.to_luma16();
        LightField::from_fn(dims, |gu, gv, _, y, x| {
            buf.get_pixel((gv * sw + x) as u32, (gu * sh + y) as u32)[0] as f32 / 65535.0
        })
    } else {
        let buf = img.to_rgb16();
        LightField::from_fn(dims, |gu, gv, ch, y, x| {
            buf.get_pixel((gv * sw + x) as u32, (gu * sh + y) as u32)[ch] as f32 / 65535.0
        })
    };
    Ok(lf)
}

pub fn import_sai_grid(path: impl AsRef<Path>, u: usize, v: usize) -> Result<LightField<f32>> {
    let img = image::open(path)?;
    grid_to_light_field(&img, u, v)
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Tiles every view into one image (8-bit or 16-bit, gray or RGB by channel count).
pub fn light_field_to_grid(lf: &LightField<f32>, sixteen_bit: bool) -> Result<DynamicImage> {
    let d = lf.dims();
    let (gw, gh) = ((d.v * d.w) as u32, (d.u * d.h) as u32);
    let at = |x: u32, y: u32, c: usize| {
        let (gu, yy) = (y as usize / d.h, y as usize % d.h);
        let (gv, xx) = (x as usize / d.w, x as usize % d.w);
        lf.at(gu, gv, c, yy, xx)
    };
    let img = match (d.c, sixteen_bit) {
        (1, false) => DynamicImage::ImageLuma8(ImageBuffer::from_fn(gw, gh, |x, y| Luma([quantize(at(x, y, 0), 255.0) as u8]))),
        (1, true) => DynamicImage::ImageLuma16(ImageBuffer::from_fn(gw, gh, |x, y| Luma([quantize(at(x, y, 0), 65535.0) as u16]))),
        (3, false) => DynamicImage::ImageRgb8(ImageBuffer::from_fn(gw, gh, |x, y| {
            Rgb([0, 1, 2].map(|c| quantize(at(x, y, c), 255.0) as u8))
        })),
        (3, true) => DynamicImage::ImageRgb16(ImageBuffer::from_fn(gw, gh, |x, y| {
            Rgb([0, 1, 2].map(|c| quantize(at(x, y, c), 65535.0) as u16))
        })),
        (c, _) => return Err(Error::InvalidArgument(format!("cannot export {c}-channel light field as an image"))),
    };
    Ok(img)
}

pub fn export_sai_grid(lf: &LightField<f32>, path: impl AsRef<Path>, sixteen_bit: bool) -> Result<()> {
    light_field_to_grid(lf, sixteen_bit)?.save(path)?;
    Ok(())
}

/// Writes a single-channel 2D slice (e.g. an EPI) as an 8-bit grayscale image.
pub fn save_gray_image(img: &Image<f32>, path: impl AsRef<Path>) -> Result<()> {
    if img.c != 1 {
        return Err(Error::InvalidArgument(format!("expected one channel, got {}", img.c)));
    }
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(img.w as u32, img.h as u32, |x, y| {
        Luma([quantize(img.at(0, y as usize, x as usize), 255.0) as u8])
    });
    buf.save(path)?;
    Ok(())
}
