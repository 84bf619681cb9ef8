//! Decomposition kernels: ordered chains of sub-space convolution stages.
//!
//! Every stage is reshape → 3×3 same-padded convolution → ReLU on one of
//! the six sub-spaces. A kernel kind fixes the sequence of sub-spaces;
//! stages are applied first-to-last (innermost function first).

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lightfield::LightField;
use crate::nn::{relu_inplace, relu_mask, Conv2D, ConvGrads};
use crate::scalar::Scalar;
use crate::subspace::{into_field, to_view, SubspacePair, ViewTensor};
use crate::trace::{ShapeRecord, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Sas,
    Epi1,
    Epi2,
    Epi3,
    Alpha,
    Beta,
    Gamma,
    /// Spatial stage duplicated `n` times, then one angular stage.
    Dup1(usize),
    /// One spatial stage, then the angular stage duplicated `n` times.
    Dup2(usize),
}

impl KernelKind {
    pub fn validate(self) -> Result<Self> {
        match self {
            KernelKind::Dup1(n) | KernelKind::Dup2(n) if n < 2 => {
                Err(Error::InvalidConfig(format!("duplication count must be at least 2, got {n}")))
            }
            k => Ok(k),
        }
    }

    /// Sub-space sequence, first stage first.
    pub fn stage_pairs(self) -> Vec<SubspacePair> {
        use SubspacePair::*;
        match self {
            KernelKind::Sas => vec![Spatial, Angular],
            KernelKind::Epi1 => vec![EpiUX, EpiVY],
            KernelKind::Epi2 => vec![EpiUY, EpiVX],
            KernelKind::Alpha => vec![Spatial, Angular, EpiUX, EpiVY],
            KernelKind::Beta => vec![Spatial, Angular, EpiUY, EpiVX],
            KernelKind::Epi3 => vec![EpiUX, EpiVY, EpiUY, EpiVX],
            KernelKind::Gamma => vec![Spatial, Angular, EpiUX, EpiVY, EpiUY, EpiVX],
            KernelKind::Dup1(n) => {
                let mut v = vec![Spatial; n];
                v.push(Angular);
                v
            }
            KernelKind::Dup2(n) => {
                let mut v = vec![Spatial];
                v.extend(std::iter::repeat_n(Angular, n));
                v
            }
        }
    }

    /// Number of sub-space connections (convolution stages).
    pub fn connection_count(self) -> usize {
        match self {
            KernelKind::Sas | KernelKind::Epi1 | KernelKind::Epi2 => 2,
            KernelKind::Epi3 | KernelKind::Alpha | KernelKind::Beta => 4,
            KernelKind::Gamma => 6,
            KernelKind::Dup1(n) | KernelKind::Dup2(n) => n + 1,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Sas => f.write_str("sas"),
            KernelKind::Epi1 => f.write_str("epi1"),
            KernelKind::Epi2 => f.write_str("epi2"),
            KernelKind::Epi3 => f.write_str("epi3"),
            KernelKind::Alpha => f.write_str("alpha"),
            KernelKind::Beta => f.write_str("beta"),
            KernelKind::Gamma => f.write_str("gamma"),
            KernelKind::Dup1(n) => write!(f, "dup1-{}", n + 1),
            KernelKind::Dup2(n) => write!(f, "dup2-{}", n + 1),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "sas" => KernelKind::Sas,
            "epi1" => KernelKind::Epi1,
            "epi2" => KernelKind::Epi2,
            "epi3" => KernelKind::Epi3,
            "alpha" => KernelKind::Alpha,
            "beta" => KernelKind::Beta,
            "gamma" => KernelKind::Gamma,
            other => {
                let dup = |rest: &str| -> Result<usize> {
                    let conns: usize = rest
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad duplication suffix in {other:?}")))?;
                    conns
                        .checked_sub(1)
                        .ok_or_else(|| Error::InvalidConfig(format!("bad duplication suffix in {other:?}")))
                };
                if let Some(rest) = other.strip_prefix("dup1-") {
                    KernelKind::Dup1(dup(rest)?)
                } else if let Some(rest) = other.strip_prefix("dup2-") {
                    KernelKind::Dup2(dup(rest)?)
                } else {
                    return Err(Error::InvalidConfig(format!("unknown kernel kind {other:?}")));
                }
            }
        };
        kind.validate()
    }
}

/// Reshape, 3×3 convolution and ReLU on one sub-space.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceStage<T = f32> {
    pub pair: SubspacePair,
    pub conv: Conv2D<T>,
}

impl<T: Scalar> SubspaceStage<T> {
    pub fn new<R: Rng>(pair: SubspacePair, in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        SubspaceStage { pair, conv: Conv2D::same3x3(in_ch, out_ch, rng) }
    }

    pub fn forward(&self, t: &LightField<T>) -> Result<LightField<T>> {
        self.forward_traced(t, None)
    }

    pub(crate) fn forward_traced(&self, t: &LightField<T>, trace: Trace<'_>) -> Result<LightField<T>> {
        let view = to_view(t, self.pair);
        let mut y = self.conv.forward(&view.tensor)?;
        if let Some(tr) = trace {
            tr.push(ShapeRecord::new(format!("Reshape to {}", self.pair.label()), &t.dims().as_array(), &view.tensor.shape()));
            tr.push(ShapeRecord::new(format!("Convolution on {}", self.pair.label()), &view.tensor.shape(), &y.shape()));
        }
        relu_inplace(&mut y.data);
        into_field(ViewTensor::new(self.pair, t.dims(), y)?)
    }

    /// Given the stage `input` and its `output`, maps `grad_out` to the
    /// input gradient and the layer's parameter gradients.
    pub fn backward(
        &self,
        input: &LightField<T>,
        output: &LightField<T>,
        grad_out: &LightField<T>,
    ) -> Result<(LightField<T>, ConvGrads<T>)> {
        if grad_out.dims() != output.dims() {
            return Err(Error::DimensionMismatch(format!("stage gradient {} vs output {}", grad_out.dims(), output.dims())));
        }
        let mut g = to_view(grad_out, self.pair);
        let out_view = to_view(output, self.pair);
        relu_mask(&out_view.tensor.data, &mut g.tensor.data);
        let in_view = to_view(input, self.pair);
        let (gx, grads) = self.conv.backward(&in_view.tensor, &g.tensor)?;
        Ok((into_field(ViewTensor::new(self.pair, input.dims(), gx)?)?, grads))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionKernel<T = f32> {
    pub kind: KernelKind,
    pub in_ch: usize,
    pub feat_ch: usize,
    pub stages: Vec<SubspaceStage<T>>,
}

/// Activations retained for the backward pass: the kernel input followed
/// by the output of every stage.
#[derive(Clone, Debug)]
pub struct KernelCache<T> {
    pub activations: Vec<LightField<T>>,
}

impl<T: Scalar> DecompositionKernel<T> {
    /// Builds a kernel whose first stage maps `in_ch → feat_ch` and whose
    /// remaining stages map `feat_ch → feat_ch`, each with its own weights.
    pub fn build<R: Rng>(kind: KernelKind, in_ch: usize, feat_ch: usize, rng: &mut R) -> Result<Self> {
        let kind = kind.validate()?;
        if in_ch == 0 || feat_ch == 0 {
            return Err(Error::InvalidConfig("kernel channel counts must be positive".into()));
        }
        let stages = kind
            .stage_pairs()
            .into_iter()
            .enumerate()
            .map(|(i, pair)| SubspaceStage::new(pair, if i == 0 { in_ch } else { feat_ch }, feat_ch, rng))
            .collect();
        Ok(DecompositionKernel { kind, in_ch, feat_ch, stages })
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.conv.param_count()).sum()
    }

    /// Closed form: `(in·feat·9 + feat) + (stages − 1)·(feat²·9 + feat)`.
    pub fn expected_param_count(kind: KernelKind, in_ch: usize, feat_ch: usize) -> usize {
        let stages = kind.connection_count();
        (in_ch * feat_ch * 9 + feat_ch) + (stages - 1) * (feat_ch * feat_ch * 9 + feat_ch)
    }

    pub fn connection_count(&self) -> usize {
        self.stages.len()
    }

    fn check_input(&self, t: &LightField<T>) -> Result<()> {
        if t.dims().c != self.in_ch {
            return Err(Error::DimensionMismatch(format!(
                "{} kernel expects {} channels, got {}",
                self.kind,
                self.in_ch,
                t.dims().c
            )));
        }
        Ok(())
    }

    pub fn forward(&self, t: &LightField<T>) -> Result<LightField<T>> {
        self.check_input(t)?;
        let mut cur = self.stages[0].forward(t)?;
        for stage in &self.stages[1..] {
            cur = stage.forward(&cur)?;
        }
        Ok(cur)
    }

    pub(crate) fn forward_traced(&self, t: &LightField<T>, mut trace: Trace<'_>) -> Result<LightField<T>> {
        self.check_input(t)?;
        let mut cur = self.stages[0].forward_traced(t, trace.as_deref_mut())?;
        for stage in &self.stages[1..] {
            cur = stage.forward_traced(&cur, trace.as_deref_mut())?;
            // Between stages the data moves view to view; list it that way.
            if let Some(tr) = trace.as_deref_mut() {
                let n = tr.len();
                if n >= 3 {
                    tr[n - 2].input = tr[n - 3].output.clone();
                }
            }
        }
        Ok(cur)
    }

    /// Forward pass keeping every intermediate activation; takes ownership of the input.
    pub fn forward_cached(&self, t: LightField<T>) -> Result<(LightField<T>, KernelCache<T>)> {
        self.check_input(&t)?;
        let mut activations = Vec::with_capacity(self.stages.len() + 1);
        activations.push(t);
        for stage in &self.stages {
            let next = stage.forward(activations.last().expect("non-empty"))?;
            activations.push(next);
        }
        let out = activations.last().expect("non-empty").clone();
        Ok((out, KernelCache { activations }))
    }

    /// Returns the input gradient and per-stage parameter gradients (stage order).
    pub fn backward(&self, cache: &KernelCache<T>, grad_out: &LightField<T>) -> Result<(LightField<T>, Vec<ConvGrads<T>>)> {
        let mut grads = Vec::with_capacity(self.stages.len());
        let mut g = grad_out.clone();
        for (i, stage) in self.stages.iter().enumerate().rev() {
            let (gi, pg) = stage.backward(&cache.activations[i], &cache.activations[i + 1], &g)?;
            grads.push(pg);
            g = gi;
        }
        grads.reverse();
        Ok((g, grads))
    }
}
