//! Pixel-wise MSE, the SAI-wise feature-space loss and their weighted sum.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::WeightArchive;
use crate::lightfield::LightField;
use crate::nn::{max_pool2, max_pool2_backward, relu_inplace, relu_mask, Conv2D};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Seed of the `standin-small` extractor weights.
pub const STANDIN_SEED: u64 = 0x5EED_F00D;
/// Default weight of the feature loss in the combined objective.
pub const DEFAULT_LAMBDA: f64 = 5e-4;

/// A loss value with its gradient with respect to the prediction.
#[derive(Clone, Debug)]
pub struct LossValue<T> {
    pub value: f64,
    pub grad: LightField<T>,
}

/// A fixed map from a batch of images `(n, C, H, W)` to feature maps
/// `(n, C_l, H_l, W_l)`, differentiable with respect to its input.
pub trait FeatureExtractor<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    /// Feature dims `(C_l, H_l, W_l)` for an input of `(c, h, w)`.
    fn output_dims(&self, c: usize, h: usize, w: usize) -> Result<(usize, usize, usize)>;

    /// Returns the features and whatever activations [`backward`](Self::backward) needs.
    fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<Tensor4<T>>)>;

    fn backward(&self, cache: &[Tensor4<T>], grad: &Tensor4<T>) -> Result<Tensor4<T>>;
}

/// `φ(x) = x`; with it the feature loss reduces exactly to MSE.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityExtractor;

impl<T: Scalar> FeatureExtractor<T> for IdentityExtractor {
    fn name(&self) -> &str {
        "identity"
    }

    fn output_dims(&self, c: usize, h: usize, w: usize) -> Result<(usize, usize, usize)> {
        Ok((c, h, w))
    }

    fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<Tensor4<T>>)> {
        Ok((x.clone(), Vec::new()))
    }

    fn backward(&self, _cache: &[Tensor4<T>], grad: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(grad.clone())
    }
}

#[derive(Clone, Debug)]
pub enum StackLayer<T> {
    Conv(Conv2D<T>),
    Relu,
    MaxPool2,
}

/// Sequential conv / ReLU / max-pool feature network.
#[derive(Clone, Debug)]
pub struct ConvStack<T> {
    name: String,
    in_ch: usize,
    layers: Vec<StackLayer<T>>,
}

/// VGG-19 convolution widths per block, up to and including `relu5_4`.
const VGG19_BLOCKS: [(usize, usize); 5] = [(64, 2), (128, 2), (256, 4), (512, 4), (512, 4)];

impl<T: Scalar> ConvStack<T> {
    pub fn new(name: impl Into<String>, in_ch: usize, layers: Vec<StackLayer<T>>) -> Self {
        ConvStack { name: name.into(), in_ch, layers }
    }

    /// `standin-small`: three seeded 3×3 conv + ReLU layers, the first two
    /// with stride 2 (`C → 8 → 16 → 16`, spatial reduction 4).
    pub fn standin_small(in_ch: usize) -> Self {
        let mut rng = crate::rng(STANDIN_SEED);
        let layers = vec![
            StackLayer::Conv(Conv2D::seeded(in_ch, 8, (3, 3), (2, 2), (1, 1), &mut rng)),
            StackLayer::Relu,
            StackLayer::Conv(Conv2D::seeded(8, 16, (3, 3), (2, 2), (1, 1), &mut rng)),
            StackLayer::Relu,
            StackLayer::Conv(Conv2D::seeded(16, 16, (3, 3), (1, 1), (1, 1), &mut rng)),
            StackLayer::Relu,
        ];
        ConvStack::new("standin-small", in_ch, layers)
    }

    /// `vgg19-relu5_4` from an archive with entries
    /// `vgg19.conv{block}_{index}.weight` / `.bias` (1-based, torchvision order).
    /// No input normalization is applied.
    pub fn vgg19_relu5_4(archive: &WeightArchive) -> Result<Self> {
        let mut layers = Vec::new();
        let mut in_ch = 3;
        for (b, &(width, count)) in VGG19_BLOCKS.iter().enumerate() {
            if b > 0 {
                layers.push(StackLayer::MaxPool2);
            }
            for i in 0..count {
                let base = format!("vgg19.conv{}_{}", b + 1, i + 1);
                let mut conv = Conv2D::new(in_ch, width, (3, 3), (1, 1), (1, 1));
                archive.load_into(&format!("{base}.weight"), &[width, in_ch, 3, 3], &mut conv.weight)?;
                archive.load_into(&format!("{base}.bias"), &[width], &mut conv.bias)?;
                layers.push(StackLayer::Conv(conv));
                layers.push(StackLayer::Relu);
                in_ch = width;
            }
        }
        Ok(ConvStack::new("vgg19-relu5_4", 3, layers))
    }
}

impl<T: Scalar> FeatureExtractor<T> for ConvStack<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn output_dims(&self, c: usize, mut h: usize, mut w: usize) -> Result<(usize, usize, usize)> {
        if c != self.in_ch {
            return Err(Error::DimensionMismatch(format!("{} expects {} channels, got {c}", self.name, self.in_ch)));
        }
        let mut ch = c;
        for l in &self.layers {
            match l {
                StackLayer::Conv(conv) => {
                    (h, w) = conv.output_size(h, w)?;
                    ch = conv.out_ch;
                }
                StackLayer::Relu => {}
                StackLayer::MaxPool2 => {
                    (h, w) = (h / 2, w / 2);
                }
            }
        }
        if h == 0 || w == 0 {
            return Err(Error::DimensionMismatch(format!("{} input too small", self.name)));
        }
        Ok((ch, h, w))
    }

    fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<Tensor4<T>>)> {
        self.output_dims(x.c, x.h, x.w)?;
        let mut cache = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for l in &self.layers {
            let next = match l {
                StackLayer::Conv(conv) => conv.forward(&cur)?,
                StackLayer::Relu => {
                    let mut y = cur.clone();
                    relu_inplace(&mut y.data);
                    y
                }
                StackLayer::MaxPool2 => max_pool2(&cur),
            };
            cache.push(cur);
            cur = next;
        }
        Ok((cur, cache))
    }

    fn backward(&self, cache: &[Tensor4<T>], grad: &Tensor4<T>) -> Result<Tensor4<T>> {
        if cache.len() != self.layers.len() {
            return Err(Error::InvalidArgument("feature cache does not match extractor".into()));
        }
        let mut g = grad.clone();
        for (l, input) in self.layers.iter().zip(cache).rev() {
            g = match l {
                StackLayer::Conv(conv) => conv.backward(input, &g)?.0,
                StackLayer::Relu => {
                    relu_mask(&input.data, &mut g.data);
                    g
                }
                StackLayer::MaxPool2 => max_pool2_backward(input, &g)?,
            };
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossMode {
    Mse,
    Lfvgg,
    Combined,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Mse => "mse",
            LossMode::Lfvgg => "lfvgg",
            LossMode::Combined => "combined",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mse" => Ok(LossMode::Mse),
            "lfvgg" => Ok(LossMode::Lfvgg),
            "combined" => Ok(LossMode::Combined),
            other => Err(Error::InvalidConfig(format!("unknown loss mode {other:?}"))),
        }
    }
}

#[derive(Clone)]
pub struct LossConfig<T: Scalar> {
    pub mode: LossMode,
    pub lambda: f64,
    pub extractor: Arc<dyn FeatureExtractor<T>>,
}

impl<T: Scalar> fmt::Debug for LossConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossConfig")
            .field("mode", &self.mode)
            .field("lambda", &self.lambda)
            .field("extractor", &self.extractor.name())
            .finish()
    }
}

impl<T: Scalar> LossConfig<T> {
    pub fn mse() -> Self {
        LossConfig { mode: LossMode::Mse, lambda: DEFAULT_LAMBDA, extractor: Arc::new(IdentityExtractor) }
    }

    pub fn new(mode: LossMode, lambda: f64, extractor: Arc<dyn FeatureExtractor<T>>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be a nonnegative number, got {lambda}")));
        }
        Ok(LossConfig { mode, lambda, extractor })
    }

    pub fn evaluate(&self, y: &LightField<T>, y_hat: &LightField<T>) -> Result<LossValue<T>> {
        match self.mode {
            LossMode::Mse => mse_loss(y, y_hat),
            LossMode::Lfvgg => lfvgg_loss(y, y_hat, self.extractor.as_ref()),
            LossMode::Combined => combined_loss(y, y_hat, self.lambda, self.extractor.as_ref()),
        }
    }
}

fn check_shapes<T: Scalar>(y: &LightField<T>, y_hat: &LightField<T>) -> Result<()> {
    if y.dims() != y_hat.dims() {
        return Err(Error::DimensionMismatch(format!("target {} vs prediction {}", y.dims(), y_hat.dims())));
    }
    Ok(())
}

/// Mean squared error over every sample; gradient `2(Ŷ − Y)/N`.
pub fn mse_loss<T: Scalar>(y: &LightField<T>, y_hat: &LightField<T>) -> Result<LossValue<T>> {
    check_shapes(y, y_hat)?;
    let n = y.data().len().max(1) as f64;
    let mut sum = 0.0;
    let scale = T::of(2.0 / n);
    let grad: Vec<T> = y
        .data()
        .iter()
        .zip(y_hat.data())
        .map(|(&a, &b)| {
            let d = b - a;
            sum += d.as_f64() * d.as_f64();
            d * scale
        })
        .collect();
    Ok(LossValue { value: sum / n, grad: LightField::from_vec(y.dims(), grad)? })
}

/// Squared feature distance summed over all SAIs, normalized by
/// `U·V·C_l·H_l·W_l`.
pub fn lfvgg_loss<T: Scalar>(
    y: &LightField<T>,
    y_hat: &LightField<T>,
    phi: &dyn FeatureExtractor<T>,
) -> Result<LossValue<T>> {
    check_shapes(y, y_hat)?;
    let d = y.dims();
    let (cl, hl, wl) = phi.output_dims(d.c, d.h, d.w)?;
    let (fy, _) = phi.forward(&y.clone().into_views())?;
    let (fh, cache) = phi.forward(&y_hat.clone().into_views())?;
    if fh.shape() != [d.views(), cl, hl, wl] || fy.shape() != fh.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{} produced {:?}, expected ({},{cl},{hl},{wl})",
            phi.name(),
            fh.shape(),
            d.views()
        )));
    }
    let n = (d.views() * cl * hl * wl).max(1) as f64;
    let scale = T::of(2.0 / n);
    let mut sum = 0.0;
    let g_feat: Vec<T> = fy
        .data
        .iter()
        .zip(&fh.data)
        .map(|(&a, &b)| {
            let diff = b - a;
            sum += diff.as_f64() * diff.as_f64();
            diff * scale
        })
        .collect();
    let g_feat = Tensor4::from_vec(fh.n, cl, hl, wl, g_feat)?;
    let g_in = phi.backward(&cache, &g_feat)?;
    Ok(LossValue { value: sum / n, grad: LightField::from_views(g_in, d.u, d.v)? })
}

/// `mse + λ·lfvgg`, with the gradient combined the same way.
pub fn combined_loss<T: Scalar>(
    y: &LightField<T>,
    y_hat: &LightField<T>,
    lambda: f64,
    phi: &dyn FeatureExtractor<T>,
) -> Result<LossValue<T>> {
    let mut base = mse_loss(y, y_hat)?;
    if lambda == 0.0 {
        return Ok(base);
    }
    let feat = lfvgg_loss(y, y_hat, phi)?;
    let l = T::of(lambda);
    for (g, f) in base.grad.data_mut().iter_mut().zip(feat.grad.data()) {
        *g += l * *f;
    }
    base.value += lambda * feat.value;
    Ok(base)
}
