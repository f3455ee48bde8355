use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dsp::BandConfig;
use crate::losses::{LossSchedule, DEFAULT_HR_SIGMA};

use super::adamw::AdamWConfig;
use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from `lr` at epoch 1 to `min_lr` at the last epoch.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub theta: f64,
    pub alpha_time: f64,
    pub hr_sigma: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub grad_clip: f64,
    pub lr_schedule: LrSchedule,
    pub min_lr: f64,
    pub precision: Precision,
    /// Band used for validation heart-rate estimates.
    pub band: BandConfig,
    #[serde(skip)]
    pub seed: u64,
    #[serde(skip)]
    pub dataset: PathBuf,
    #[serde(skip)]
    pub checkpoint_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 9e-3,
            weight_decay: 0.0,
            batch_size: 4,
            epochs: 30,
            lambda: 1.0,
            theta: 1.5,
            alpha_time: 1.0,
            hr_sigma: DEFAULT_HR_SIGMA,
            grad_clip: 1.0,
            lr_schedule: LrSchedule::Constant,
            min_lr: 0.0,
            precision: Precision::F32,
            band: BandConfig::FILTER,
            seed: 0,
            dataset: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("runs"),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.grad_clip >= 0.0) {
            return bad(format!("grad_clip {}", self.grad_clip));
        }
        if !(self.hr_sigma > 0.0) {
            return bad(format!("hr_sigma {}", self.hr_sigma));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.lr) {
            return bad(format!("min_lr {} must lie in [0, lr]", self.min_lr));
        }
        self.schedule(1).validate()?;
        Ok(())
    }

    pub fn schedule(&self, epoch: usize) -> LossSchedule {
        LossSchedule {
            lambda: self.lambda,
            theta: self.theta,
            epoch_current: epoch,
            epoch_total: self.epochs,
            alpha_time: self.alpha_time,
        }
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamWConfig::default() }
    }

    /// Learning rate for a 1-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine if self.epochs == 1 => self.lr,
            LrSchedule::Cosine => {
                let p = (epoch - 1) as f64 / (self.epochs - 1) as f64;
                self.min_lr + 0.5 * (self.lr - self.min_lr) * (1.0 + (std::f64::consts::PI * p).cos())
            }
        }
    }
}
