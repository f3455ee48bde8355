//! Synthetic pulsatile video: pulse waveforms, rendered skin-patch clips
//! and persisted datasets.

mod bvp;
mod dataset;
mod render;
mod scenario;


use thiserror::Error;

use crate::dsp::DspError;
use crate::tensor::serialize::SerializeError;
use crate::tensor::TensorError;

pub use bvp::{gen_bvp, gen_bvp_with_baseline, Waveform, HR_MAX_BPM, HR_MIN_BPM};
pub use dataset::{
    build_dataset, import_dataset, ClipRecord, Dataset, DatasetManifest, Split, SplitRatios, DATASET_FORMAT,
    DATASET_MANIFEST,
};
pub use render::{render_clip, synthesize_clip, VideoClip};
pub use scenario::{Illumination, Motion, PatchGeometry, Preset, ScenarioSpec, CHANNEL_GAINS};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SerializeError> for SynthError {
    fn from(e: SerializeError) -> Self {
        match e {
            SerializeError::Io(io) => SynthError::Io(io),
            SerializeError::Tensor(t) => SynthError::Tensor(t),
            other => SynthError::Manifest(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, SynthError>;
