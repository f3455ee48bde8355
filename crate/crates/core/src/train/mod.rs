//! AdamW training loop, checkpoint selection and the HR metric suite.

mod adamw;
mod config;
mod eval;
mod run;

#[cfg(test)]
mod tests;

use std::path::PathBuf;

use thiserror::Error;

use crate::dsp::DspError;
use crate::losses::LossError;
use crate::model::ModelError;
use crate::synth::SynthError;
use crate::tensor::TensorError;

pub use adamw::{adamw_step, clip_grad_norm, AdamW, AdamWConfig, MomentState};
pub use config::{LrSchedule, Precision, TrainConfig};
pub use eval::{
    checkpoint_precision, compute_metrics, estimate_clip_hr, evaluate, evaluate_checkpoint, ClipRow, EvalReport,
    Metrics, PostConfig,
};
pub use run::{
    read_log, stack_clips, train, train_model, EpochLog, TrainOutcome, TrainSummary, BEST_DIR, FINAL_DIR, LOG_FILE,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite value at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { epoch: usize, batch: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, TrainError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> TrainError {
    let path = path.into();
    move |source| TrainError::Io { path, source }
}
