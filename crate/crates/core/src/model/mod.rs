//! The rPPG network: differential frame fusion, two temporal-shift
//! attention stages and an upsampling decoder head.

mod checkpoint;
mod config;
mod diff;
mod network;


use thiserror::Error;

use crate::tensor::serialize::SerializeError;
use crate::tensor::TensorError;

pub use checkpoint::{parse_kv, CheckpointMeta, MANIFEST_FILE, WEIGHTS_FILE};
pub use config::{ArchConfig, DiffMode, FusionMode, UPSAMPLE_FACTOR};
pub use diff::{as_batch, diff_offsets, make_diff_stack};
pub use network::{FusionStem, Model, StasBlock, Stem, UdfHead};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid architecture: {0}")]
    Config(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SerializeError> for ModelError {
    fn from(e: SerializeError) -> Self {
        match e {
            SerializeError::Io(io) => ModelError::Io(io),
            SerializeError::Tensor(t) => ModelError::Tensor(t),
            other => ModelError::Checkpoint(other.to_string()),
        }
    }
}
