use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::BandConfig;
use crate::tensor::{DiffTensor, Scalar};

use super::{LossError, Result};

/// Floor applied to probabilities before taking a logarithm.
pub const KL_FLOOR: f64 = 1e-12;

/// Minimum zero-padded transform length of the differentiable periodogram.
const MIN_NFFT: usize = 4096;

/// Inclusive 1-bpm heart-rate grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrGrid {
    pub lo_bpm: u32,
    pub hi_bpm: u32,
}

impl Default for HrGrid {
    fn default() -> Self {
        HrGrid { lo_bpm: 40, hi_bpm: 180 }
    }
}

impl HrGrid {
    pub fn len(&self) -> usize {
        (self.hi_bpm - self.lo_bpm + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bpm(&self, i: usize) -> f64 {
        (self.lo_bpm as usize + i) as f64
    }

    pub fn bins(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.bpm(i)).collect()
    }

    /// Index of the bin nearest to `bpm`, clamped to the grid.
    pub fn nearest(&self, bpm: f64) -> usize {
        let i = (bpm - self.lo_bpm as f64).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    fn validate(&self) -> Result<()> {
        if self.lo_bpm == 0 || self.hi_bpm <= self.lo_bpm {
            return Err(LossError::InvalidArgument(format!("bad bpm grid {}..{}", self.lo_bpm, self.hi_bpm)));
        }
        Ok(())
    }
}

/// A probability mass function over an [`HrGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct HrDistribution {
    pub grid: HrGrid,
    pub pmf: Vec<f64>,
    /// Mode, or the Gaussian centre, in bpm.
    pub mu: f64,
    /// Present for Gaussian distributions.
    pub sigma: Option<f64>,
}

impl HrDistribution {
    pub fn bins(&self) -> Vec<f64> {
        self.grid.bins()
    }

    /// First bin of maximal mass.
    pub fn argmax(&self) -> usize {
        argmax(&self.pmf)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Discretized normal density on `grid`, renormalized to sum 1.
pub fn gaussian_pmf(mu: f64, sigma: f64, grid: HrGrid) -> Result<HrDistribution> {
    grid.validate()?;
    if !(sigma > 0.0) || !mu.is_finite() {
        return Err(LossError::InvalidArgument(format!(
            "gaussian_pmf: need finite mu and sigma > 0, got {mu}, {sigma}"
        )));
    }
    let raw: Vec<f64> = grid.bins().iter().map(|b| (-0.5 * ((b - mu) / sigma).powi(2)).exp()).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(LossError::InvalidArgument(format!("gaussian_pmf: mu {mu} too far outside the grid")));
    }
    Ok(HrDistribution { grid, pmf: raw.iter().map(|v| v / total).collect(), mu, sigma: Some(sigma) })
}

/// How band power becomes a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmfNorm {
    #[default]
    Sum,
    Softmax,
}

/// Precomputed linear maps for the differentiable periodogram of signals
/// of one length and frame rate.
///
/// The signal is mean-centred, transformed with a zero-padded DFT restricted
/// to the bins around the band, squared, linearly interpolated onto the bpm
/// grid and normalized. Grid bins outside the band carry no mass.
#[derive(Debug, Clone)]
pub struct PsdBasis<T: Scalar> {
    pub len: usize,
    pub fps: f64,
    pub band: BandConfig,
    pub grid: HrGrid,
    pub norm: PmfNorm,
    pub nfft: usize,
    /// `[len, 2K]`: cosine columns then sine columns.
    dft: DiffTensor<T>,
    /// `[K, G]` interpolation weights.
    interp: DiffTensor<T>,
    n_dft: usize,
}

impl<T: Scalar> PsdBasis<T> {
    pub fn new(len: usize, fps: f64, band: BandConfig, grid: HrGrid, norm: PmfNorm) -> Result<Self> {
        if len < 16 {
            return Err(LossError::InvalidArgument(format!("periodogram needs at least 16 samples, got {len}")));
        }
        grid.validate()?;
        band.validate(fps).map_err(|e| LossError::InvalidArgument(e.to_string()))?;
        let nfft = len.next_power_of_two().max(MIN_NFFT);
        let bin_hz = fps / nfft as f64;

        let in_band: Vec<usize> = (0..grid.len())
            .filter(|&g| {
                let f = grid.bpm(g) / 60.0;
                f >= band.f_lo - 1e-12 && f <= band.f_hi + 1e-12
            })
            .collect();
        let (Some(&g_first), Some(&g_last)) = (in_band.first(), in_band.last()) else {
            return Err(LossError::InvalidArgument(format!(
                "band {}..{} Hz contains no bin of the {}..{} bpm grid",
                band.f_lo, band.f_hi, grid.lo_bpm, grid.hi_bpm
            )));
        };
        let pos = |g: usize| grid.bpm(g) / 60.0 / bin_hz;
        let k_lo = pos(g_first).floor() as usize;
        let k_hi = pos(g_last).floor() as usize + 1;
        let n_dft = k_hi - k_lo + 1;

        let mut dft = vec![T::zero(); len * 2 * n_dft];
        for n in 0..len {
            for j in 0..n_dft {
                let k = (k_lo + j) as f64;
                // reduce the phase index modulo nfft to keep the argument small
                let phase = 2.0 * PI * (((k as usize) * n) % nfft) as f64 / nfft as f64;
                dft[n * 2 * n_dft + j] = T::of(phase.cos());
                dft[n * 2 * n_dft + n_dft + j] = T::of(-phase.sin());
            }
        }
        let mut interp = vec![T::zero(); n_dft * grid.len()];
        for &g in &in_band {
            let r = pos(g);
            let k0 = r.floor() as usize;
            let frac = r - k0 as f64;
            interp[(k0 - k_lo) * grid.len() + g] = T::of(1.0 - frac);
            interp[(k0 + 1 - k_lo) * grid.len() + g] = T::of(frac);
        }
        Ok(PsdBasis {
            len,
            fps,
            band,
            grid,
            norm,
            nfft,
            dft: DiffTensor::new(dft, vec![len, 2 * n_dft])?,
            interp: DiffTensor::new(interp, vec![n_dft, grid.len()])?,
            n_dft,
        })
    }

    /// Unnormalized band power on the grid, `[G]`.
    pub fn power(&self, x: &DiffTensor<T>) -> Result<DiffTensor<T>> {
        if x.dims() != [self.len] {
            return Err(LossError::InvalidArgument(format!(
                "periodogram basis built for length {}, got {:?}",
                self.len,
                x.dims()
            )));
        }
        let centred = x.sub(&x.mean()?)?.reshape(vec![1, self.len])?;
        let spectrum = centred.matmul(&self.dft)?.square()?.reshape(vec![2, self.n_dft])?;
        let power = spectrum.sum_axes(&[0], true)?;
        Ok(power.matmul(&self.interp)?.reshape(vec![self.grid.len()])?)
    }

    /// Differentiable distribution `[G]` summing to 1.
    ///
    /// A signal without band power (for example all zeros) maps to the
    /// uniform distribution over the grid.
    pub fn pmf(&self, x: &DiffTensor<T>) -> Result<DiffTensor<T>> {
        let power = self.power(x)?;
        match self.norm {
            PmfNorm::Softmax => Ok(power.softmax(0)?),
            PmfNorm::Sum => {
                let total = power.sum()?;
                if !(total.item().as_f64() > 0.0) {
                    let uniform = T::of(1.0 / self.grid.len() as f64);
                    return Ok(power.mul_scalar(T::zero())?.add_scalar(uniform)?);
                }
                Ok(power.div(&total)?)
            }
        }
    }

    /// Non-differentiable distribution with its mode.
    pub fn distribution(&self, x: &DiffTensor<T>) -> Result<HrDistribution> {
        let pmf = crate::tensor::no_grad(|| self.pmf(x))?.to_f64_vec();
        let mu = self.grid.bpm(argmax(&pmf));
        Ok(HrDistribution { grid: self.grid, pmf, mu, sigma: None })
    }
}

/// One-off [`PsdBasis::distribution`] of a plain signal with sum normalization.
pub fn psd_distribution(x: &[f64], fps: f64, band: BandConfig, grid: HrGrid) -> Result<HrDistribution> {
    let basis = PsdBasis::<f64>::new(x.len(), fps, band, grid, PmfNorm::Sum)?;
    basis.distribution(&DiffTensor::new(x.to_vec(), vec![x.len()])?)
}

/// `−log(pred[k*])` with `k*` the first mode of `gt`.
pub fn freq_ce<T: Scalar>(pred_pmf: &DiffTensor<T>, gt_pmf: &[f64]) -> Result<DiffTensor<T>> {
    if pred_pmf.dims() != [gt_pmf.len()] {
        return Err(LossError::InvalidArgument(format!("freq_ce: {:?} vs {} bins", pred_pmf.dims(), gt_pmf.len())));
    }
    let k = argmax(gt_pmf);
    let p = pred_pmf.narrow(0, k, 1)?.sum()?;
    Ok(p.clamp_min(T::of(KL_FLOOR))?.ln()?.neg()?)
}

/// `Σ p·ln(p / max(q, 1e-12))` over bins with `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &qi)| pi * (pi / qi.max(KL_FLOOR)).ln()).sum()
}

/// Divergence between two Gaussian heart-rate distributions of equal width.
pub fn hr_kl_gauss(gt_hr: f64, pred_hr: f64, sigma: f64, grid: HrGrid) -> Result<f64> {
    let p = gaussian_pmf(gt_hr, sigma, grid)?;
    let q = gaussian_pmf(pred_hr, sigma, grid)?;
    Ok(kl_divergence(&p.pmf, &q.pmf))
}

/// Differentiable `KL(N(gt_hr, σ²) ‖ pred_pmf)`.
pub fn hr_kl_psd<T: Scalar>(gt_hr: f64, pred_pmf: &DiffTensor<T>, sigma: f64, grid: HrGrid) -> Result<DiffTensor<T>> {
    let p = gaussian_pmf(gt_hr, sigma, grid)?;
    if pred_pmf.dims() != [grid.len()] {
        return Err(LossError::InvalidArgument(format!("hr_kl: {:?} vs {} bins", pred_pmf.dims(), grid.len())));
    }
    let entropy_term: f64 = p.pmf.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum();
    let weights = DiffTensor::from_f64(&p.pmf, vec![grid.len()])?;
    let cross = pred_pmf.clamp_min(T::of(KL_FLOOR))?.ln()?.mul(&weights)?.sum()?;
    Ok(cross.neg()?.add_scalar(T::of(entropy_term))?)
}

/// Which form of the heart-rate divergence to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMode {
    /// Both sides Gaussian; the prediction is centred on its periodogram mode.
    GaussGauss,
    /// Gaussian target against the predicted periodogram distribution.
    GaussPsd,
}

/// Heart-rate divergence of a predicted waveform against a reference rate.
pub fn hr_kl<T: Scalar>(
    gt_hr: f64,
    pred: &DiffTensor<T>,
    basis: &PsdBasis<T>,
    sigma: f64,
    mode: KlMode,
) -> Result<DiffTensor<T>> {
    match mode {
        KlMode::GaussPsd => hr_kl_psd(gt_hr, &basis.pmf(pred)?, sigma, basis.grid),
        KlMode::GaussGauss => {
            let mu_pred = basis.distribution(pred)?.mu;
            Ok(DiffTensor::scalar(T::of(hr_kl_gauss(gt_hr, mu_pred, sigma, basis.grid)?)))
        }
    }
}
