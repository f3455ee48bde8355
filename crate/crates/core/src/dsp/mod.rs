//! Post-processing: band-pass filtering, Welch spectra, heart-rate
//! extraction and correlation.

mod filter;
mod spectrum;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{butterworth_bandpass, filtfilt, lfilter, Biquad, FilterSpec};
pub use spectrum::{estimate_hr, periodogram, welch_psd, write_psd, PsdEstimate, PsdMethod, WelchConfig, Window};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("unstable filter: poles of {0:?} outside the unit circle")]
    Unstable([f64; 2]),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DspError> = std::result::Result<T, E>;

/// A frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self::HEART_RATE
    }
}

impl BandConfig {
    /// Search band for heart-rate peaks and spectral losses (39.6–180 bpm).
    pub const HEART_RATE: BandConfig = BandConfig { f_lo: 0.66, f_hi: 3.0 };
    /// Pass band of the post-processing filter (45–150 bpm).
    pub const FILTER: BandConfig = BandConfig { f_lo: 0.75, f_hi: 2.5 };

    pub fn from_bpm(lo: f64, hi: f64) -> Self {
        BandConfig { f_lo: lo / 60.0, f_hi: hi / 60.0 }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.f_lo > 0.0 && self.f_lo < self.f_hi && self.f_hi < fs / 2.0) {
            return Err(DspError::InvalidArgument(format!(
                "band {}..{} Hz must satisfy 0 < lo < hi < fs/2 = {}",
                self.f_lo,
                self.f_hi,
                fs / 2.0
            )));
        }
        Ok(())
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_lo && f <= self.f_hi
    }
}

/// Sample correlation of two equal-length series; `None` when undefined
/// (fewer than two samples, a constant series or a length mismatch).
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
