use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{BandConfig, DspError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchConfig {
    pub segment: usize,
    pub overlap: usize,
    pub nfft: usize,
    pub window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig { segment: 128, overlap: 64, nfft: 2048, window: Window::Hann }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdMethod {
    Welch,
    Periodogram,
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub method: PsdMethod,
    pub config: WelchConfig,
}

/// Averaged one-sided density of windowed, overlapping, zero-padded segments.
///
/// Density scaling: `|X(f)|² / (fs·Σw²)`, doubled away from DC and Nyquist.
pub fn welch_psd(x: &[f64], fs: f64, cfg: &WelchConfig) -> Result<PsdEstimate> {
    let WelchConfig { segment, overlap, nfft, window } = *cfg;
    if segment == 0 || overlap >= segment || nfft < segment {
        return Err(DspError::InvalidArgument(format!(
            "welch: need 0 < overlap < segment <= nfft, got {overlap}, {segment}, {nfft}"
        )));
    }
    if x.len() < segment {
        return Err(DspError::InvalidArgument(format!("welch: segment {segment} longer than signal {}", x.len())));
    }
    if !(fs > 0.0) {
        return Err(DspError::InvalidArgument(format!("welch: sample rate {fs}")));
    }
    let w = window.coefficients(segment);
    let scale = 1.0 / (fs * w.iter().map(|v| v * v).sum::<f64>());
    let step = segment - overlap;
    let n_seg = 1 + (x.len() - segment) / step;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let n_bins = nfft / 2 + 1;
    let mut power = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for s in 0..n_seg {
        let seg = &x[s * step..s * step + segment];
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (&v, &wi)) in seg.iter().zip(&w).enumerate() {
            buf[i].re = v * wi;
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
    }
    for (k, p) in power.iter_mut().enumerate() {
        let one_sided = if k == 0 || (nfft % 2 == 0 && k == nfft / 2) { 1.0 } else { 2.0 };
        *p *= scale * one_sided / n_seg as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / nfft as f64).collect();
    Ok(PsdEstimate {
        freqs,
        power,
        method: if n_seg == 1 { PsdMethod::Periodogram } else { PsdMethod::Welch },
        config: *cfg,
    })
}

/// Single full-length segment with the given window.
pub fn periodogram(x: &[f64], fs: f64, nfft: usize, window: Window) -> Result<PsdEstimate> {
    let cfg = WelchConfig { segment: x.len(), overlap: 0, nfft: nfft.max(x.len()), window };
    welch_psd(x, fs, &cfg)
}

/// `60 ×` the frequency of maximal power inside `band`; first maximum wins.
pub fn estimate_hr(psd: &PsdEstimate, band: BandConfig) -> Result<f64> {
    let mut best: Option<usize> = None;
    for (i, &f) in psd.freqs.iter().enumerate() {
        if band.contains(f) && best.is_none_or(|b| psd.power[i] > psd.power[b]) {
            best = Some(i);
        }
    }
    let i = best
        .ok_or_else(|| DspError::InvalidArgument(format!("no spectral bin inside {}..{} Hz", band.f_lo, band.f_hi)))?;
    Ok(60.0 * psd.freqs[i])
}

/// Two-column `freq_hz power` text file.
pub fn write_psd(path: &Path, psd: &PsdEstimate) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# freq_hz power")?;
    for (f, p) in psd.freqs.iter().zip(&psd.power) {
        writeln!(w, "{f} {p:e}")?;
    }
    w.flush()?;
    Ok(())
}
