use crate::tensor::{DiffTensor, Scalar};

use super::spectral::{freq_ce, hr_kl_psd, PsdBasis};
use super::{beta_schedule, neg_pearson, LossError, LossSchedule, Result, DEFAULT_HR_SIGMA};

/// Fixed ingredients of the objective for one clip length and frame rate.
#[derive(Debug, Clone)]
pub struct LossContext<T: Scalar> {
    pub basis: PsdBasis<T>,
    pub sigma: f64,
}

impl<T: Scalar> LossContext<T> {
    pub fn new(basis: PsdBasis<T>) -> Self {
        LossContext { basis, sigma: DEFAULT_HR_SIGMA }
    }
}

/// The differentiable total and its logged components.
#[derive(Debug, Clone)]
pub struct LossParts<T: Scalar> {
    pub total: DiffTensor<T>,
    pub l_time: f64,
    pub l_ce: f64,
    pub l_hr: f64,
    pub beta: f64,
}

/// `alpha_time·L_time + β·(L_ce + L_hr)` for one waveform, with `β` from
/// [`beta_schedule`] and the Gaussian-vs-periodogram divergence.
pub fn overall_loss<T: Scalar>(
    pred: &DiffTensor<T>,
    gt_wave: &DiffTensor<T>,
    gt_hr: f64,
    schedule: &LossSchedule,
    ctx: &LossContext<T>,
) -> Result<LossParts<T>> {
    let beta = beta_schedule(schedule)?;
    let l_time = neg_pearson(pred, gt_wave)?;
    let pred_pmf = ctx.basis.pmf(pred)?;
    let gt_pmf = ctx.basis.distribution(gt_wave)?.pmf;
    let l_ce = freq_ce(&pred_pmf, &gt_pmf)?;
    let l_hr = hr_kl_psd(gt_hr, &pred_pmf, ctx.sigma, ctx.basis.grid)?;
    let spectral = l_ce.add(&l_hr)?.mul_scalar(T::of(beta))?;
    let total = l_time.mul_scalar(T::of(schedule.alpha_time))?.add(&spectral)?;
    Ok(LossParts {
        l_time: l_time.item().as_f64(),
        l_ce: l_ce.item().as_f64(),
        l_hr: l_hr.item().as_f64(),
        beta,
        total,
    })
}

/// Mean of [`overall_loss`] over the rows of a `[N, L]` prediction.
pub fn batch_loss<T: Scalar>(
    pred: &DiffTensor<T>,
    gt_waves: &[DiffTensor<T>],
    gt_hrs: &[f64],
    schedule: &LossSchedule,
    ctx: &LossContext<T>,
) -> Result<LossParts<T>> {
    let &[n, len] = pred.dims() else {
        return Err(LossError::InvalidArgument(format!("expected [N, L] predictions, got {:?}", pred.dims())));
    };
    if gt_waves.len() != n || gt_hrs.len() != n {
        return Err(LossError::InvalidArgument(format!(
            "{n} predictions but {} waveforms and {} rates",
            gt_waves.len(),
            gt_hrs.len()
        )));
    }
    let mut parts = Vec::with_capacity(n);
    for i in 0..n {
        let row = pred.narrow(0, i, 1)?.reshape(vec![len])?;
        parts.push(overall_loss(&row, &gt_waves[i], gt_hrs[i], schedule, ctx)?);
    }
    let scale = 1.0 / n as f64;
    let mut total = parts[0].total.clone();
    for p in &parts[1..] {
        total = total.add(&p.total)?;
    }
    let mean = |f: fn(&LossParts<T>) -> f64| parts.iter().map(f).sum::<f64>() * scale;
    Ok(LossParts {
        total: total.mul_scalar(T::of(scale))?,
        l_time: mean(|p| p.l_time),
        l_ce: mean(|p| p.l_ce),
        l_hr: mean(|p| p.l_hr),
        beta: parts[0].beta,
    })
}
