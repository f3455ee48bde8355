use std::sync::Mutex;

use crate::tensor::{DiffTensor, Result, Scalar, TensorError};

use super::Mode;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Per-channel batch normalization over `(N, T, H, W)` of a `[N, C, T, H, W]` input.
#[derive(Debug)]
pub struct BatchNorm3d<T: Scalar> {
    pub gamma: DiffTensor<T>,
    pub beta: DiffTensor<T>,
    pub running: Mutex<RunningStats>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Scalar> Clone for BatchNorm3d<T> {
    fn clone(&self) -> Self {
        BatchNorm3d {
            gamma: self.gamma.clone(),
            beta: self.beta.clone(),
            running: Mutex::new(self.running_stats()),
            eps: self.eps,
            momentum: self.momentum,
        }
    }
}

impl<T: Scalar> BatchNorm3d<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(BatchNorm3d {
            gamma: DiffTensor::parameter(vec![T::one(); channels], vec![channels])?,
            beta: DiffTensor::parameter(vec![T::zero(); channels], vec![channels])?,
            running: Mutex::new(RunningStats { mean: vec![0.0; channels], var: vec![1.0; channels] }),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn running_stats(&self) -> RunningStats {
        self.running.lock().expect("running stats lock").clone()
    }

    pub fn set_running_stats(&self, stats: RunningStats) {
        *self.running.lock().expect("running stats lock") = stats;
    }

    pub fn param_count(&self) -> usize {
        self.gamma.numel() + self.beta.numel()
    }

    pub fn forward(&self, x: &DiffTensor<T>, mode: Mode) -> Result<DiffTensor<T>> {
        batchnorm3d(x, &self.gamma, &self.beta, &self.running, mode, self.eps, self.momentum)
    }
}

/// Training mode normalizes with batch statistics and updates `running`
/// (biased variance for normalization, unbiased for the running estimate);
/// eval mode normalizes with `running`.
pub fn batchnorm3d<T: Scalar>(
    x: &DiffTensor<T>,
    gamma: &DiffTensor<T>,
    beta: &DiffTensor<T>,
    running: &Mutex<RunningStats>,
    mode: Mode,
    eps: f64,
    momentum: f64,
) -> Result<DiffTensor<T>> {
    let &[n, c, t, h, w] = x.dims() else {
        return Err(TensorError::InvalidArgument {
            op: "batchnorm3d",
            reason: format!("expected [N, C, T, H, W], got {:?}", x.dims()),
        });
    };
    if gamma.dims() != [c] || beta.dims() != [c] {
        return Err(TensorError::ShapeMismatch { op: "batchnorm3d", lhs: vec![c], rhs: gamma.dims().to_vec() });
    }
    let plane = t * h * w;
    let count = n * plane;
    let xd = x.data();
    let channel = |ci: usize| (0..n).flat_map(move |ni| (ni * c + ci) * plane..(ni * c + ci + 1) * plane);

    let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
        Mode::Train => {
            let mut means = Vec::with_capacity(c);
            let mut vars = Vec::with_capacity(c);
            for ci in 0..c {
                let mu = channel(ci).map(|i| xd[i].as_f64()).sum::<f64>() / count as f64;
                let var = channel(ci).map(|i| (xd[i].as_f64() - mu).powi(2)).sum::<f64>() / count as f64;
                means.push(mu);
                vars.push(var);
            }
            let mut stats = running.lock().expect("running stats lock");
            let unbias = if count > 1 { count as f64 / (count - 1) as f64 } else { 1.0 };
            for ci in 0..c {
                stats.mean[ci] = (1.0 - momentum) * stats.mean[ci] + momentum * means[ci];
                stats.var[ci] = (1.0 - momentum) * stats.var[ci] + momentum * vars[ci] * unbias;
            }
            (means, vars)
        }
        Mode::Eval => {
            let stats = running.lock().expect("running stats lock");
            (stats.mean.clone(), stats.var.clone())
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = vec![T::zero(); xd.len()];
    let (gd, bd) = (gamma.data(), beta.data());
    for ci in 0..c {
        let (mu, is) = (T::of(mean[ci]), T::of(inv_std[ci]));
        for i in channel(ci) {
            let xh = (xd[i] - mu) * is;
            xhat[i] = xh;
            out[i] = gd[ci] * xh + bd[ci];
        }
    }

    let g_tensor = gamma.clone();
    DiffTensor::from_op(
        "batchnorm3d",
        out,
        x.shape().clone(),
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |g, needs| {
            let channel = |ci: usize| (0..n).flat_map(move |ni| (ni * c + ci) * plane..(ni * c + ci + 1) * plane);
            let gd = g_tensor.data();
            let mut sum_g = vec![0.0f64; c];
            let mut sum_gx = vec![0.0f64; c];
            for ci in 0..c {
                for i in channel(ci) {
                    sum_g[ci] += g[i].as_f64();
                    sum_gx[ci] += (g[i] * xhat[i]).as_f64();
                }
            }
            let gx = needs[0].then(|| {
                let mut gx = vec![T::zero(); xhat.len()];
                for ci in 0..c {
                    let scale = gd[ci].as_f64() * inv_std[ci];
                    match mode {
                        Mode::Train => {
                            let m = count as f64;
                            let (a, b) = (T::of(sum_g[ci] / m), T::of(sum_gx[ci] / m));
                            let s = T::of(scale);
                            for i in channel(ci) {
                                gx[i] = s * (g[i] - a - xhat[i] * b);
                            }
                        }
                        Mode::Eval => {
                            let s = T::of(scale);
                            for i in channel(ci) {
                                gx[i] = s * g[i];
                            }
                        }
                    }
                }
                gx
            });
            let ggamma = needs[1].then(|| sum_gx.iter().map(|&v| T::of(v)).collect());
            let gbeta = needs[2].then(|| sum_g.iter().map(|&v| T::of(v)).collect());
            vec![gx, ggamma, gbeta]
        }),
    )
}
