//! Layers for 5-D feature maps laid out as `[N, C, T, H, W]`.

mod attention;
mod batchnorm;
mod conv;
mod pool;
mod temporal;

#[cfg(test)]
mod tests;

pub use attention::{attention_mask, attention_weights, AttentionParams};
pub use batchnorm::{batchnorm3d, BatchNorm3d, RunningStats, BN_EPS, BN_MOMENTUM};
pub use conv::{conv3d, Conv3dParams, Triple};
pub use pool::maxpool3d;
pub use temporal::{dropout, shift_blocks, temporal_shift, upsample_temporal};

/// Whether layers use batch statistics and stochastic regularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub const DEFAULT_DROPOUT: f64 = 0.2;
