//! PSNR and SSIM over images and light fields, and dataset evaluation.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::infer::{super_resolve_with, InferOptions, SuperResolver};
use crate::io::{load_light_field, DatasetManifest};
use crate::lightfield::{Image, LightField};
use crate::scalar::Scalar;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// PSNR in decibels, or the sentinel for inputs with zero error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Identical => None,
            Psnr::Db(v) => Some(v),
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Identical => f.write_str("identical"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

fn same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    Ok(())
}

/// `10·log10(peak² / mse)` over two equally sized sample buffers.
pub fn psnr<T: Scalar>(a: &[T], b: &[T], peak: f64) -> Result<Psnr> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    let se: f64 = a.iter().zip(b).map(|(&x, &y)| (x.as_f64() - y.as_f64()).powi(2)).sum();
    if se == 0.0 {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(10.0 * (peak * peak / (se / a.len() as f64)).log10()))
}

/// Per-SAI PSNR values in `(u, v)` row-major order.
pub fn psnr_per_sai<T: Scalar>(a: &LightField<T>, b: &LightField<T>, peak: f64) -> Result<Vec<Psnr>> {
    check_dims(a, b)?;
    let n = a.dims().c * a.dims().h * a.dims().w;
    a.data().chunks_exact(n).zip(b.data().chunks_exact(n)).map(|(x, y)| psnr(x, y, peak)).collect()
}

/// Mean of the per-SAI dB values. SAIs with zero error carry no finite
/// value and are left out; if every SAI is identical the result is the
/// sentinel.
pub fn psnr_lf<T: Scalar>(a: &LightField<T>, b: &LightField<T>, peak: f64) -> Result<Psnr> {
    let vals: Vec<f64> = psnr_per_sai(a, b, peak)?.into_iter().filter_map(Psnr::db).collect();
    if vals.is_empty() {
        return Ok(Psnr::Identical);
    }
    Ok(Psnr::Db(vals.iter().sum::<f64>() / vals.len() as f64))
}

fn check_dims<T: Scalar>(a: &LightField<T>, b: &LightField<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let mid = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - mid).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h×w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + k]).map(|(t, s)| t * s).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of one channel plane.
pub fn ssim_plane<T: Scalar>(a: &[T], b: &[T], h: usize, w: usize, peak: f64) -> Result<f64> {
    same_len(a, b)?;
    if a.len() != h * w {
        return Err(Error::DimensionMismatch(format!("plane of {} samples is not {h}x{w}", a.len())));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let x: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    let y: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| s * t).collect::<Vec<f64>>();
    let mx = filter_valid(&x, h, w, &taps);
    let my = filter_valid(&y, h, w, &taps);
    let sxx = filter_valid(&prod(&x, &x), h, w, &taps);
    let syy = filter_valid(&prod(&y, &y), h, w, &taps);
    let sxy = filter_valid(&prod(&x, &y), h, w, &taps);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// SSIM per channel, averaged over channels.
pub fn ssim_image<T: Scalar>(a: &Image<T>, b: &Image<T>, peak: f64) -> Result<f64> {
    if (a.c, a.h, a.w) != (b.c, b.h, b.w) {
        return Err(Error::DimensionMismatch(format!("({},{},{}) vs ({},{},{})", a.c, a.h, a.w, b.c, b.h, b.w)));
    }
    let mut s = 0.0;
    for c in 0..a.c {
        s += ssim_plane(a.channel(c), b.channel(c), a.h, a.w, peak)?;
    }
    Ok(s / a.c as f64)
}

pub fn ssim_per_sai<T: Scalar>(a: &LightField<T>, b: &LightField<T>, peak: f64) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    let d = a.dims();
    let mut out = Vec::with_capacity(d.views());
    for u in 0..d.u {
        for v in 0..d.v {
            out.push(ssim_image(&a.extract_sai(u, v)?, &b.extract_sai(u, v)?, peak)?);
        }
    }
    Ok(out)
}

/// Mean SSIM over SAIs.
pub fn ssim_lf<T: Scalar>(a: &LightField<T>, b: &LightField<T>, peak: f64) -> Result<f64> {
    let v = ssim_per_sai(a, b, peak)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// ITU-R BT.601 luma of a 3-channel light field; 1-channel input passes through.
pub fn to_luma<T: Scalar>(lf: &LightField<T>) -> Result<LightField<T>> {
    let d = lf.dims();
    match d.c {
        1 => Ok(lf.clone()),
        3 => {
            let (kr, kg, kb) = (T::of(0.299), T::of(0.587), T::of(0.114));
            Ok(LightField::from_fn(d.with_channels(1), |u, v, _, y, x| {
                kr * lf.at(u, v, 0, y, x) + kg * lf.at(u, v, 1, y, x) + kb * lf.at(u, v, 2, y, x)
            }))
        }
        c => Err(Error::InvalidArgument(format!("luma needs 1 or 3 channels, got {c}"))),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColorMode {
    #[default]
    Rgb,
    Luma,
}

/// PSNR and SSIM of one prediction against its ground truth.
pub fn score<T: Scalar>(truth: &LightField<T>, pred: &LightField<T>, mode: ColorMode) -> Result<(Psnr, f64)> {
    let (t, p) = match mode {
        ColorMode::Rgb => (truth.clone(), pred.clone()),
        ColorMode::Luma => (to_luma(truth)?, to_luma(pred)?),
    };
    Ok((psnr_lf(&t, &p, 1.0)?, ssim_lf(&t, &p, 1.0)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleScore {
    pub name: String,
    pub psnr: Psnr,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub samples: Vec<SampleScore>,
    /// Files that could not be scored, with the reason.
    pub failures: Vec<(String, String)>,
}

impl EvalReport {
    /// True when no sample was scored.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Mean of finite per-sample PSNR values.
    pub fn mean_psnr(&self) -> Psnr {
        let v: Vec<f64> = self.samples.iter().filter_map(|s| s.psnr.db()).collect();
        if v.is_empty() {
            Psnr::Identical
        } else {
            Psnr::Db(v.iter().sum::<f64>() / v.len() as f64)
        }
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().map(|s| s.ssim).sum::<f64>() / self.samples.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample,psnr_db,ssim\n");
        for r in &self.samples {
            s.push_str(&format!("{},{},{:.6}\n", r.name, r.psnr, r.ssim));
        }
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.samples {
            writeln!(f, "{}: PSNR {} dB, SSIM {:.4}", r.name, r.psnr, r.ssim)?;
        }
        for (name, why) in &self.failures {
            writeln!(f, "{name}: FAILED ({why})")?;
        }
        if self.is_empty() {
            writeln!(f, "samples: 0 (empty report)")
        } else {
            writeln!(
                f,
                "samples: {}  mean PSNR {} dB  mean SSIM {:.4}",
                self.count(),
                self.mean_psnr(),
                self.mean_ssim().unwrap_or(f64::NAN)
            )
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub scale: usize,
    pub angular: (usize, usize),
    /// Views dropped from each angular border before scoring.
    pub angular_crop: usize,
    /// Pixels dropped from each spatial border before scoring.
    pub spatial_crop: usize,
    pub color: ColorMode,
    pub infer: InferOptions,
}

/// Crops, trims to a multiple of `r`, downsamples, super-resolves and scores.
pub fn evaluate_one(model: &dyn SuperResolver, hr: &LightField<f32>, opts: &EvalOptions) -> Result<(Psnr, f64)> {
    let r = opts.scale;
    let hr = hr.crop_border(opts.angular_crop, opts.spatial_crop)?;
    let d = hr.dims();
    let (h, w) = (d.h / r * r, d.w / r * r);
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument(format!("light field {d} too small for scale {r}")));
    }
    let hr = hr.crop_spatial(0, 0, h, w)?;
    let lr = hr.downsample_bilinear(r)?;
    let sr = super_resolve_with(model, &lr, &opts.infer)?;
    score(&hr, &sr, opts.color)
}

/// Scores every manifest entry; per-file failures are recorded and skipped.
pub fn evaluate(model: &dyn SuperResolver, manifest: &DatasetManifest, opts: &EvalOptions) -> EvalReport {
    let mut report = EvalReport::default();
    for e in &manifest.entries {
        let name = e.path.display().to_string();
        match load_light_field(Path::new(&e.path), opts.angular).and_then(|lf| evaluate_one(model, &lf, opts)) {
            Ok((psnr, ssim)) => report.samples.push(SampleScore { name, psnr, ssim }),
            Err(err) => report.failures.push((name, err.to_string())),
        }
    }
    report
}
