//! Differentiable building blocks: convolution, activations, channel
//! bookkeeping, sub-pixel shuffling and the optimizer.

mod adam;
mod conv;
mod ops;

pub use adam::{Adam, AdamConfig};
pub use conv::{Conv2D, ConvGrads};
pub use ops::{
    concat_channels, max_pool2, max_pool2_backward, pixel_shuffle, pixel_unshuffle, relu, relu_backward,
    relu_inplace, relu_mask, split_channels,
};
