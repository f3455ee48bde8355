//! Subcommand implementations behind the `pulseforge` binary.
//!
//! Each `cmd_*` takes a resolved [`RunConfig`], writes only inside its
//! output directory, and leaves a `resolved_config.toml` snapshot there.

mod bench;
mod commands;
mod config;
mod gradsuite;

use thiserror::Error;

use crate::dsp::DspError;
use crate::losses::LossError;
use crate::model::ModelError;
use crate::synth::SynthError;
use crate::tensor::TensorError;
use crate::train::TrainError;

pub use bench::{run_bench, BenchReport, BenchRow};
pub use commands::{cmd_bench, cmd_eval, cmd_gradcheck, cmd_infer, cmd_synth, cmd_train, InferOutput};
pub use config::{
    ArchPreset, ArchSection, BenchSection, DataSection, EvalSection, InferSection, RunConfig, ScenarioSection,
    SEED_ENV, SNAPSHOT_FILE,
};
pub use gradsuite::{gradient_suite, SuiteRow, SUITE_H, SUITE_TOL};

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn machine_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "code": self.exit_code(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::Io(io) => io.into(),
            DspError::Unstable(_) => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Tensor(t) => t.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            ModelError::Io(io) => io.into(),
            ModelError::Checkpoint(m) => CliError::Io(format!("checkpoint: {m}")),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Tensor(t) => t.into(),
            SynthError::Dsp(d) => d.into(),
            SynthError::Io(io) => io.into(),
            SynthError::Manifest(m) => CliError::Io(format!("dataset manifest: {m}")),
            SynthError::InvalidArgument(m) => CliError::Config(m),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Config(m),
            e @ TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Loss(l) => l.into(),
            TrainError::Synth(s) => s.into(),
            TrainError::Dsp(d) => d.into(),
            TrainError::Tensor(t) => t.into(),
            e @ TrainError::Io { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<crate::tensor::serialize::SerializeError> for CliError {
    fn from(e: crate::tensor::serialize::SerializeError) -> Self {
        use crate::tensor::serialize::SerializeError;
        match e {
            SerializeError::Tensor(t) => t.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}
