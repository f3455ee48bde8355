//! Dense row-major tensors with reverse-mode automatic differentiation.
//!
//! A [`DiffTensor`] is an immutable value plus an optional link into the
//! gradient graph that produced it. Graph nodes are recorded only while
//! gradients are enabled on the current thread (see [`no_grad`]) and only
//! when at least one input requires a gradient.

mod elementwise;
pub mod gradcheck;
mod graph;
pub mod kinks;
mod linalg;
mod reduce;
mod scalar;
pub mod serialize;
mod shape;
mod structural;

pub use graph::{no_grad, BackwardFn, DiffTensor};
pub use reduce::ReduceKind;
pub use scalar::{DType, Scalar};
pub use shape::Shape;

pub(crate) use shape::{broadcast_strides, StridedWalk};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch, {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: &'static str },
    #[error("data length {found} does not match shape product {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    InvalidAxis { op: &'static str, axis: usize, rank: usize },
    #[error("{op}: empty reduction")]
    EmptyReduction { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("gradient graph already consumed by a previous backward pass")]
    GraphConsumed,
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
