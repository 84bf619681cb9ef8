//! Light-field super-resolution with decomposition kernels.
//!
//! A light field is a 5D tensor `(u, v, c, y, x)`. The network convolves
//! it on 2D slices through different pairs of axes (spatial, angular and
//! the four epipolar pairs), stacks these stages into decomposition
//! kernels, and upsamples each view with a sub-pixel shuffle.
//!
//! ```
//! use lfdk::{DKNet, DKNetConfig};
//!
//! let net = DKNet::<f32>::build(DKNetConfig::default(), 1).unwrap();
//! assert_eq!(net.param_count(), 4_011_328);
//! ```

pub mod dknet;
mod error;
pub mod infer;
pub mod io;
pub mod kernels;
pub mod lightfield;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod patches;
mod scalar;
pub mod subspace;
mod tensor;
mod trace;
pub mod train;

pub use dknet::{DKNet, DKNetConfig, ForwardCache, LayerCount, ParamReport};
pub use error::{Error, Result};
pub use infer::{super_resolve, super_resolve_with, BilinearBaseline, InferOptions, SuperResolver};
pub use kernels::{DecompositionKernel, KernelKind, SubspaceStage};
pub use lightfield::{Dims5, Image, LightField};
pub use losses::{LossConfig, LossMode};
pub use metrics::{EvalReport, Psnr};
pub use patches::{sample_patches, Patch};
pub use scalar::Scalar;
pub use subspace::{from_view, to_view, Axis, SubspacePair, ViewTensor};
pub use tensor::Tensor4;
pub use trace::ShapeRecord;
pub use train::{fit, loss_and_grads, train_step};

/// Seeded generator used for every random draw in the crate.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Environment variable bounding the worker thread count.
pub const THREADS_ENV: &str = "LFDK_THREADS";

/// Reads [`THREADS_ENV`]; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Configures the global thread pool from [`THREADS_ENV`]. Has no effect
/// if the pool was already initialized.
pub fn init_threads() -> Result<()> {
    if let Some(n) = threads_from_env()? {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
