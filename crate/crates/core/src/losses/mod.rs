//! Training objective: temporal negative Pearson, spectral cross-entropy,
//! heart-rate distribution divergence and the epoch-dependent weighting.

mod overall;
mod pearson;
mod schedule;
mod spectral;

#[cfg(test)]
mod tests;

use thiserror::Error;

use crate::tensor::TensorError;

pub use overall::{batch_loss, overall_loss, LossContext, LossParts};
pub use pearson::{degenerate_pearson_count, neg_pearson};
pub use schedule::{beta_schedule, LossSchedule};
pub use spectral::{
    freq_ce, gaussian_pmf, hr_kl, hr_kl_gauss, hr_kl_psd, kl_divergence, psd_distribution, HrDistribution, HrGrid,
    KlMode, PmfNorm, PsdBasis, KL_FLOOR,
};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = LossError> = std::result::Result<T, E>;

/// Default width of the Gaussian heart-rate distribution, in bpm.
pub const DEFAULT_HR_SIGMA: f64 = 3.0;
