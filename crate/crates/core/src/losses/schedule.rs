use serde::{Deserialize, Serialize};

use super::{LossError, Result};

/// Weights of the hybrid objective at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSchedule {
    pub lambda: f64,
    pub theta: f64,
    pub epoch_current: usize,
    pub epoch_total: usize,
    pub alpha_time: f64,
}

impl Default for LossSchedule {
    fn default() -> Self {
        LossSchedule { lambda: 1.0, theta: 1.5, epoch_current: 1, epoch_total: 30, alpha_time: 1.0 }
    }
}

impl LossSchedule {
    pub fn at_epoch(self, epoch: usize) -> Self {
        LossSchedule { epoch_current: epoch, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epoch_current < 1 || self.epoch_total < 1 {
            return Err(LossError::InvalidArgument(format!(
                "epochs count from 1, got {} of {}",
                self.epoch_current, self.epoch_total
            )));
        }
        if !(self.theta > 0.0) || !self.lambda.is_finite() || !self.alpha_time.is_finite() {
            return Err(LossError::InvalidArgument(format!(
                "theta must be positive and weights finite, got lambda={} theta={} alpha_time={}",
                self.lambda, self.theta, self.alpha_time
            )));
        }
        Ok(())
    }
}

/// `λ·θ^((epoch − 1)/epochs)`.
pub fn beta_schedule(s: &LossSchedule) -> Result<f64> {
    s.validate()?;
    let exponent = (s.epoch_current - 1) as f64 / s.epoch_total as f64;
    Ok(s.lambda * s.theta.powf(exponent))
}
