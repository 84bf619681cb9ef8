//! Full network: initial spatial convolution, `L` decomposition kernels
//! with dense and raw-image connections, angular feature reduction and
//! per-view pixel shuffling.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{DecompositionKernel, KernelCache, KernelKind, SubspaceStage};
use crate::lightfield::{Dims5, LightField};
use crate::nn::{pixel_shuffle, pixel_unshuffle, relu_inplace, relu_mask, Conv2D, ConvGrads};
use crate::scalar::Scalar;
use crate::subspace::{from_view, to_view, SubspacePair, ViewTensor};
use crate::tensor::Tensor4;
use crate::trace::{ShapeRecord, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DKNetConfig {
    /// Upsampling factor `r`.
    pub scale: usize,
    /// Angular resolution `(U, V)`.
    pub angular: (usize, usize),
    /// Image channels (3 for RGB).
    pub channels: usize,
    pub feat_ch: usize,
    /// Number of decomposition kernels `L`.
    pub depth: usize,
    pub kind: KernelKind,
    pub dense: bool,
    pub raw: bool,
}

impl Default for DKNetConfig {
    fn default() -> Self {
        DKNetConfig {
            scale: 4,
            angular: (8, 8),
            channels: 3,
            feat_ch: 32,
            depth: 18,
            kind: KernelKind::Gamma,
            dense: true,
            raw: true,
        }
    }
}

/// Where one slice of a concatenated kernel input comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    Initial,
    /// Output of kernel `j` (0-based).
    Kernel(usize),
    Raw,
}

impl DKNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.scale) {
            return Err(Error::InvalidConfig(format!("scale must be 2, 3 or 4, got {}", self.scale)));
        }
        if self.angular.0 == 0 || self.angular.1 == 0 {
            return Err(Error::InvalidConfig("angular resolution must be positive".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::InvalidConfig(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.feat_ch == 0 {
            return Err(Error::InvalidConfig("feat_ch must be at least 1".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        self.kind.validate()?;
        Ok(())
    }

    /// Channels fed to the pixel shuffler per view: `C·r²`.
    pub fn shuffle_ch(&self) -> usize {
        self.channels * self.scale * self.scale
    }

    /// The stride-2 angular reduction runs only for even extents above 4.
    pub fn has_reduce1(&self) -> bool {
        let (u, v) = self.angular;
        u.min(v) > 4 && u % 2 == 0 && v % 2 == 0
    }

    /// Angular extent entering the final reduction convolution.
    pub fn reduced_angular(&self) -> (usize, usize) {
        let (u, v) = self.angular;
        if self.has_reduce1() {
            ((u - 1) / 2 + 1, (v - 1) / 2 + 1)
        } else {
            (u, v)
        }
    }

    fn input_sources(&self, i: usize) -> Vec<Source> {
        let mut s = if i == 0 {
            vec![Source::Initial]
        } else if self.dense {
            (0..i).rev().map(Source::Kernel).collect()
        } else {
            vec![Source::Kernel(i - 1)]
        };
        if self.raw {
            s.push(Source::Raw);
        }
        s
    }

    fn final_sources(&self) -> Vec<Source> {
        let l = self.depth;
        let mut s = if self.dense { (0..l).rev().map(Source::Kernel).collect() } else { vec![Source::Kernel(l - 1)] };
        if self.raw {
            s.push(Source::Raw);
        }
        s
    }

    fn source_channels(&self, s: Source) -> usize {
        match s {
            Source::Raw => self.channels,
            _ => self.feat_ch,
        }
    }

    /// Input channels of kernel `i` (0-based).
    pub fn kernel_in_channels(&self, i: usize) -> usize {
        self.input_sources(i).into_iter().map(|s| self.source_channels(s)).sum()
    }

    /// Channels of the feature concatenation entering image generation.
    pub fn concat_channels(&self) -> usize {
        self.final_sources().into_iter().map(|s| self.source_channels(s)).sum()
    }
}

/// Parameter count of one named layer group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCount {
    pub name: String,
    pub params: usize,
}

/// Per-layer parameter listing of a network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamReport {
    pub layers: Vec<LayerCount>,
}

impl ParamReport {
    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.params).sum()
    }
}

impl fmt::Display for ParamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.layers {
            writeln!(f, "{:<32} {:>12}", l.name, l.params)?;
        }
        write!(f, "{:<32} {:>12}", "Total", self.total())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DKNet<T = f32> {
    pub config: DKNetConfig,
    pub initial: SubspaceStage<T>,
    pub kernels: Vec<DecompositionKernel<T>>,
    pub reduce1: Option<Conv2D<T>>,
    pub reduce2: Conv2D<T>,
}

/// Activations kept from a forward pass for [`DKNet::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    x: LightField<T>,
    initial_out: LightField<T>,
    kernels: Vec<KernelCache<T>>,
    concat_dims: Dims5,
    angular_view: Tensor4<T>,
    reduce1_out: Option<Tensor4<T>>,
}

impl<T: Scalar> DKNet<T> {
    /// Builds a network with weights drawn from a seeded generator.
    pub fn build(config: DKNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng(seed);
        let c = config;
        let initial = SubspaceStage::new(SubspacePair::Spatial, c.channels, c.feat_ch, &mut rng);
        let kernels = (0..c.depth)
            .map(|i| DecompositionKernel::build(c.kind, c.kernel_in_channels(i), c.feat_ch, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let cat = c.concat_channels();
        let reduce1 = c.has_reduce1().then(|| Conv2D::seeded(cat, c.feat_ch, (3, 3), (2, 2), (1, 1), &mut rng));
        let (ru, rv) = c.reduced_angular();
        let r2_in = if reduce1.is_some() { c.feat_ch } else { cat };
        let out = c.angular.0 * c.angular.1 * c.shuffle_ch();
        let reduce2 = Conv2D::seeded(r2_in, out, (ru, rv), (1, 1), (0, 0), &mut rng);
        Ok(DKNet { config, initial, kernels, reduce1, reduce2 })
    }

    /// Every convolution with its canonical name, in parameter order.
    pub fn conv_layers(&self) -> Vec<(String, &Conv2D<T>)> {
        let mut v = vec![("initial".to_string(), &self.initial.conv)];
        for (i, k) in self.kernels.iter().enumerate() {
            for (j, s) in k.stages.iter().enumerate() {
                v.push((format!("kernel.{:02}.stage.{}", i + 1, j + 1), &s.conv));
            }
        }
        if let Some(r) = &self.reduce1 {
            v.push(("reduce1".to_string(), r));
        }
        v.push(("reduce2".to_string(), &self.reduce2));
        v
    }

    /// Mutable counterpart of [`conv_layers`](Self::conv_layers), same order.
    pub fn conv_layers_mut(&mut self) -> Vec<&mut Conv2D<T>> {
        let mut v = vec![&mut self.initial.conv];
        for k in &mut self.kernels {
            for s in &mut k.stages {
                v.push(&mut s.conv);
            }
        }
        if let Some(r) = &mut self.reduce1 {
            v.push(r);
        }
        v.push(&mut self.reduce2);
        v
    }

    pub fn param_count(&self) -> usize {
        self.conv_layers().iter().map(|(_, c)| c.param_count()).sum()
    }

    pub fn param_report(&self) -> ParamReport {
        let mut layers = vec![LayerCount { name: "Initial Convolution".into(), params: self.initial.conv.param_count() }];
        for (i, k) in self.kernels.iter().enumerate() {
            layers.push(LayerCount { name: format!("Decomposition Kernel {} #{}", k.kind, i + 1), params: k.param_count() });
        }
        if let Some(r) = &self.reduce1 {
            layers.push(LayerCount { name: "Feature Reduction 1".into(), params: r.param_count() });
        }
        layers.push(LayerCount { name: "Feature Reduction 2".into(), params: self.reduce2.param_count() });
        ParamReport { layers }
    }

    fn check_input(&self, x: &LightField<T>) -> Result<()> {
        let d = x.dims();
        let c = &self.config;
        if (d.u, d.v) != c.angular || d.c != c.channels {
            return Err(Error::DimensionMismatch(format!(
                "network expects ({},{},{},_,_) input, got {d}",
                c.angular.0, c.angular.1, c.channels
            )));
        }
        if d.h == 0 || d.w == 0 {
            return Err(Error::DimensionMismatch("empty spatial extent".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &LightField<T>) -> Result<LightField<T>> {
        Ok(self.run(x, None, false)?.0)
    }

    /// Forward pass that also lists every reshape, convolution and
    /// concatenation with its input and output shape.
    pub fn forward_traced(&self, x: &LightField<T>) -> Result<(LightField<T>, Vec<ShapeRecord>)> {
        let mut rec = Vec::new();
        let out = self.run(x, Some(&mut rec), false)?.0;
        Ok((out, rec))
    }

    pub fn forward_cached(&self, x: &LightField<T>) -> Result<(LightField<T>, ForwardCache<T>)> {
        let (out, cache) = self.run(x, None, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    fn gather<'a>(
        &self,
        sources: &[Source],
        x: &'a LightField<T>,
        initial: &'a LightField<T>,
        outputs: &'a [LightField<T>],
    ) -> Vec<&'a LightField<T>> {
        sources
            .iter()
            .map(|s| match *s {
                Source::Initial => initial,
                Source::Kernel(j) => &outputs[j],
                Source::Raw => x,
            })
            .collect()
    }

    fn run(&self, x: &LightField<T>, mut trace: Trace<'_>, keep: bool) -> Result<(LightField<T>, Option<ForwardCache<T>>)> {
        self.check_input(x)?;
        let c = self.config;
        let xd = x.dims();

        let initial_out = self.initial.forward_traced(x, trace.as_deref_mut())?;
        if let Some(tr) = trace.as_deref_mut() {
            let view = SubspacePair::Spatial.view_shape(initial_out.dims());
            tr.push(ShapeRecord::new(
                "Reshape to Normal",
                &[view.0, c.feat_ch, view.1, view.2],
                &initial_out.dims().as_array(),
            ));
        }

        let mut outputs: Vec<LightField<T>> = Vec::with_capacity(c.depth);
        let mut caches = Vec::new();
        for (i, kernel) in self.kernels.iter().enumerate() {
            let input = {
                let parts = self.gather(&c.input_sources(i), x, &initial_out, &outputs);
                LightField::concat_channels(&parts)?
            };
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(ShapeRecord::new(
                    format!("K{} Concatenation", i + 1),
                    &xd.with_channels(c.feat_ch).as_array(),
                    &input.dims().as_array(),
                ));
            }
            let out = if keep {
                let (out, cache) = kernel.forward_cached(input)?;
                caches.push(cache);
                out
            } else {
                kernel.forward_traced(&input, trace.as_deref_mut())?
            };
            if let Some(tr) = trace.as_deref_mut() {
                let last = *kernel.kind.stage_pairs().last().expect("kernels have stages");
                let (b, d1, d2) = last.view_shape(out.dims());
                tr.push(ShapeRecord::new("Reshape to Normal", &[b, c.feat_ch, d1, d2], &out.dims().as_array()));
            }
            outputs.push(out);
        }

        let cat = {
            let parts = self.gather(&c.final_sources(), x, &initial_out, &outputs);
            LightField::concat_channels(&parts)?
        };
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ShapeRecord::new("Concatenation", &xd.with_channels(c.feat_ch * c.depth).as_array(), &cat.dims().as_array()));
        }
        let concat_dims = cat.dims();
        let angular_view = to_view(&cat, SubspacePair::Angular).tensor;
        drop(cat);
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ShapeRecord::new("Reshape to (u, v)", &concat_dims.as_array(), &angular_view.shape()));
        }

        let reduce1_out = match &self.reduce1 {
            Some(r1) => {
                let mut y = r1.forward(&angular_view)?;
                relu_inplace(&mut y.data);
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(ShapeRecord::new("Convolution on (u, v)", &angular_view.shape(), &y.shape()));
                }
                Some(y)
            }
            None => None,
        };
        let r2_in = reduce1_out.as_ref().unwrap_or(&angular_view);
        let r2 = self.reduce2.forward(r2_in)?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ShapeRecord::new("Feature Reduction (u, v)", &r2_in.shape(), &r2.shape()));
        }

        let folded = self.fold_views(&r2, xd)?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ShapeRecord::new("Reshape", &r2.shape(), &folded.dims().as_array()));
        }
        let shuffled = pixel_shuffle(&folded.into_views(), c.scale)?;
        let out = LightField::from_views(shuffled, c.angular.0, c.angular.1)?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ShapeRecord::new(
                "Pixel Shuffler",
                &xd.with_channels(c.shuffle_ch()).as_array(),
                &out.dims().as_array(),
            ));
        }
        if !out.is_finite() {
            return Err(Error::Divergence("non-finite network output".into()));
        }

        let cache = keep.then(|| ForwardCache {
            x: x.clone(),
            initial_out,
            kernels: caches,
            concat_dims,
            angular_view,
            reduce1_out,
        });
        Ok((out, cache))
    }

    /// `(H·W, U·V·S, 1, 1)` → `(U, V, S, H, W)`: channel index `(u·V + v)·S + s`.
    fn fold_views(&self, r2: &Tensor4<T>, xd: Dims5) -> Result<LightField<T>> {
        let s = self.config.shuffle_ch();
        let dims = Dims5::new(xd.u, xd.v, s, xd.h, xd.w);
        let hw = xd.h * xd.w;
        let ch = xd.u * xd.v * s;
        if r2.shape() != [hw, ch, 1, 1] {
            return Err(Error::DimensionMismatch(format!("reduction output {:?} != ({hw},{ch},1,1)", r2.shape())));
        }
        let mut data = vec![T::zero(); dims.len()];
        for (p, row) in r2.data.chunks_exact(ch).enumerate() {
            for (k, &val) in row.iter().enumerate() {
                data[k * hw + p] = val;
            }
        }
        LightField::from_vec(dims, data)
    }

    fn unfold_views(&self, g: &LightField<T>) -> Tensor4<T> {
        let d = g.dims();
        let hw = d.h * d.w;
        let ch = d.u * d.v * d.c;
        let mut out = Tensor4::zeros(hw, ch, 1, 1);
        for (k, plane) in g.data().chunks_exact(hw).enumerate() {
            for (p, &val) in plane.iter().enumerate() {
                out.data[p * ch + k] = val;
            }
        }
        out
    }

    /// Parameter gradients of `⟨grad_out, forward(x)⟩`, in [`conv_layers`](Self::conv_layers) order.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &LightField<T>) -> Result<Vec<ConvGrads<T>>> {
        let c = self.config;
        let xd = cache.x.dims();
        let expect = Dims5::new(xd.u, xd.v, c.channels, xd.h * c.scale, xd.w * c.scale);
        if grad_out.dims() != expect {
            return Err(Error::DimensionMismatch(format!("output gradient {} != {expect}", grad_out.dims())));
        }

        let g_fold = pixel_unshuffle(&grad_out.clone().into_views(), c.scale)?;
        let g_fold = LightField::from_views(g_fold, xd.u, xd.v)?;
        let g_r2 = self.unfold_views(&g_fold);

        let r2_in = cache.reduce1_out.as_ref().unwrap_or(&cache.angular_view);
        let (g_r2_in, grads_r2) = self.reduce2.backward(r2_in, &g_r2)?;
        let (g_av, grads_r1) = match (&self.reduce1, &cache.reduce1_out) {
            (Some(r1), Some(r1_out)) => {
                let mut g = g_r2_in;
                relu_mask(&r1_out.data, &mut g.data);
                let (gx, gr) = r1.backward(&cache.angular_view, &g)?;
                (gx, Some(gr))
            }
            _ => (g_r2_in, None),
        };
        let g_cat = from_view(&ViewTensor::new(SubspacePair::Angular, cache.concat_dims, g_av)?)?;

        let mut g_kernels: Vec<Option<LightField<T>>> = vec![None; c.depth];
        let mut g_initial: Option<LightField<T>> = None;
        let route = |sources: &[Source], g: &LightField<T>, g_kernels: &mut Vec<Option<LightField<T>>>, g_initial: &mut Option<LightField<T>>| -> Result<()> {
            let sizes: Vec<usize> = sources.iter().map(|&s| c.source_channels(s)).collect();
            for (s, part) in sources.iter().zip(g.split_channels(&sizes)?) {
                let slot = match *s {
                    Source::Raw => continue,
                    Source::Initial => &mut *g_initial,
                    Source::Kernel(j) => &mut g_kernels[j],
                };
                match slot {
                    Some(acc) => acc.add_assign(&part)?,
                    None => *slot = Some(part),
                }
            }
            Ok(())
        };
        route(&c.final_sources(), &g_cat, &mut g_kernels, &mut g_initial)?;

        let mut kernel_grads = vec![Vec::new(); c.depth];
        for i in (0..c.depth).rev() {
            let kc = &cache.kernels[i];
            let g = g_kernels[i]
                .take()
                .unwrap_or_else(|| LightField::zeros(kc.activations.last().expect("non-empty").dims()));
            let (g_in, pg) = self.kernels[i].backward(kc, &g)?;
            kernel_grads[i] = pg;
            route(&c.input_sources(i), &g_in, &mut g_kernels, &mut g_initial)?;
        }
        let g_init = g_initial.unwrap_or_else(|| LightField::zeros(cache.initial_out.dims()));
        let (_, grads_initial) = self.initial.backward(&cache.x, &cache.initial_out, &g_init)?;

        let mut all = vec![grads_initial];
        all.extend(kernel_grads.into_iter().flatten());
        all.extend(grads_r1);
        all.push(grads_r2);
        Ok(all)
    }
}
