//! Dense channels-first `f32` tensors and the forward-pass primitives of a
//! small RGB-D encoder-decoder: convolutions (full and spatially factorized),
//! folded normalization, pooling, activations, fully-connected layers,
//! learned ×2 upsampling and the residual NonBottleneck1D block.
//!
//! Everything here is inference-only and pure: identical inputs produce
//! bit-identical outputs regardless of the rayon thread count.

mod activation;
mod block;
mod container;
mod conv;
mod error;
mod init;
mod linear;
mod norm;
mod pool;
mod tensor;
mod upsample;

pub use activation::{relu, relu_inplace, sigmoid, softmax, tanh};
pub use block::{nbt1d_block, nbt1d_shortcut, Nbt1dWeights};
pub use container::{read_tensor, read_tensor_from, write_tensor, write_tensor_to, MAGIC};
pub use conv::{conv2d, factorized_conv3, ConvParams};
pub use error::TensorError;
pub use init::{he_normal, uniform_fan_in};
pub use linear::fully_connected;
pub use norm::{batch_norm, NormParams};
pub use pool::{adaptive_avg_pool, global_avg_pool, pool2d, PoolKind};
pub use tensor::Tensor;
pub use upsample::{bilinear_kernel_1d, bilinear_resize, learned_upsample, UpsampleWeights};

pub type Result<T> = std::result::Result<T, TensorError>;
