use crate::tensor::{DiffTensor, Scalar};

use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 9e-3, weight_decay: 0.0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl MomentState {
    pub fn zeros(n: usize) -> Self {
        MomentState { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One decoupled-decay Adam update of `weights` in place; `t` counts from 1.
pub fn adamw_step(
    weights: &mut [f64],
    grads: &[f64],
    state: &mut MomentState,
    cfg: &AdamWConfig,
    t: u64,
) -> Result<()> {
    let n = weights.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(TrainError::Config(format!(
            "adamw: {} weights, {} grads, {}/{} moments",
            n,
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    if t == 0 {
        return Err(TrainError::Config("adamw: step counter starts at 1".into()));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..n {
        let g = grads[i];
        weights[i] -= cfg.lr * cfg.weight_decay * weights[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        weights[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

/// AdamW over a fixed, ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: u64,
    pub state: Vec<MomentState>,
}

impl AdamW {
    pub fn new<T: Scalar>(config: AdamWConfig, params: &[&DiffTensor<T>]) -> Self {
        AdamW { config, step: 0, state: params.iter().map(|p| MomentState::zeros(p.numel())).collect() }
    }

    /// Applies `grads` (one vector per parameter) and replaces each
    /// parameter with a fresh leaf holding the updated values.
    pub fn apply<T: Scalar>(&mut self, params: &mut [&mut DiffTensor<T>], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if params.len() != self.state.len() || grads.len() != self.state.len() {
            return Err(TrainError::Config(format!(
                "adamw: {} parameters, {} grads, {} states",
                params.len(),
                grads.len(),
                self.state.len()
            )));
        }
        self.step += 1;
        let cfg = AdamWConfig { lr, ..self.config };
        for ((p, g), st) in params.iter_mut().zip(grads).zip(&mut self.state) {
            let mut w = p.to_f64_vec();
            adamw_step(&mut w, g, st, &cfg, self.step)?;
            let data = w.into_iter().map(T::of).collect();
            **p = DiffTensor::parameter(data, p.dims().to_vec())?;
        }
        Ok(())
    }
}
