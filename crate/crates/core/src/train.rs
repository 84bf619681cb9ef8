//! One optimization step: forward, loss, backward, Adam update.

use rand::Rng;
use rayon::prelude::*;

use crate::dknet::DKNet;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::io::TrainConfig;
use crate::lightfield::LightField;
use crate::nn::{Adam, AdamConfig, ConvGrads};
use crate::patches::{sample_patches_with, Patch};
use crate::scalar::Scalar;

/// Mean loss over the batch and its gradient for every convolution, in
/// [`DKNet::conv_layers`] order.
pub fn loss_and_grads<T: Scalar>(
    net: &DKNet<T>,
    batch: &[Patch<T>],
    loss: &LossConfig<T>,
) -> Result<(f64, Vec<ConvGrads<T>>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    // Samples are independent; results are reduced in batch order so the
    // outcome does not depend on scheduling.
    let per_sample: Vec<Result<(f64, Vec<ConvGrads<T>>)>> = batch
        .par_iter()
        .map(|p| {
            let (y_hat, cache) = net.forward_cached(&p.lr)?;
            let lv = loss.evaluate(&p.hr, &y_hat)?;
            let grads = net.backward(&cache, &lv.grad)?;
            Ok((lv.value, grads))
        })
        .collect();

    let scale = T::of(1.0 / batch.len() as f64);
    let mut total = 0.0;
    let mut acc: Vec<ConvGrads<T>> = net.conv_layers().iter().map(|(_, c)| ConvGrads::zeros_like(c)).collect();
    for r in per_sample {
        let (value, grads) = r?;
        total += value;
        for (a, g) in acc.iter_mut().zip(&grads) {
            a.add_scaled(g, scale);
        }
    }
    Ok((total / batch.len() as f64, acc))
}

/// Runs one step and returns the batch loss measured before the update.
/// A non-finite loss aborts the step with [`Error::Divergence`] and leaves
/// the network and optimizer untouched.
pub fn train_step<T: Scalar>(
    net: &mut DKNet<T>,
    adam: &mut Adam<T>,
    batch: &[Patch<T>],
    loss: &LossConfig<T>,
) -> Result<f64> {
    let (value, grads) = loss_and_grads(net, batch, loss)?;
    if !value.is_finite() {
        return Err(Error::Divergence(format!("loss became {value}")));
    }
    if grads.iter().any(|g| g.weight.iter().chain(&g.bias).any(|v| !v.is_finite())) {
        return Err(Error::Divergence("non-finite gradient".into()));
    }
    let mut params: Vec<&mut [T]> = Vec::new();
    for conv in net.conv_layers_mut() {
        params.push(&mut conv.weight);
        params.push(&mut conv.bias);
    }
    let g: Vec<&[T]> = grads.iter().flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()]).collect();
    adam.step(&mut params, &g)?;
    Ok(value)
}

/// Trains `net` for `cfg.steps` Adam steps on patches drawn from `data`.
///
/// Each step picks one light field uniformly, then samples `cfg.batch`
/// patches from it. `on_step(step, loss)` sees every loss as it is produced.
/// Returns the per-step losses.
pub fn fit<T: Scalar>(
    net: &mut DKNet<T>,
    data: &[LightField<T>],
    cfg: &TrainConfig,
    loss: &LossConfig<T>,
    mut on_step: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training light fields".into()));
    }
    let mut rng = crate::rng(cfg.seed.wrapping_add(1));
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let lf = &data[rng.gen_range(0..data.len())];
        let batch = sample_patches_with(lf, net.config.scale, cfg.patch, cfg.batch, &mut rng)?;
        let l = train_step(net, &mut adam, &batch, loss)?;
        on_step(step, l);
        losses.push(l);
    }
    Ok(losses)
}
