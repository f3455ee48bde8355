use std::f64::consts::PI;

use super::{BandConfig, DspError, Result};

/// Normalized second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Stability triangle of `1 + a1·z⁻¹ + a2·z⁻²`.
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    /// `|H(e^{jω})|` at `f` Hz for sample rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let eval = |c: [f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(self.b) / eval([1.0, self.a[0], self.a[1]])
    }

    /// Steady-state internal state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (r0, r1) = (b1 - a1 * b0, b2 - a2 * b0);
        let z0 = (r0 + r1) / (1.0 + a1 + a2);
        [z0, r1 - a2 * z0]
    }
}

/// Band-pass design: band, sample rate and the resulting section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub band: BandConfig,
    pub fs: f64,
    pub section: Biquad,
}

impl FilterSpec {
    /// Second-order Butterworth band-pass, `H(s) = B·s / (s² + B·s + ω₀²)`,
    /// mapped with a prewarped bilinear transform.
    pub fn bandpass(band: BandConfig, fs: f64) -> Result<Self> {
        band.validate(fs)?;
        let k = 2.0 * fs;
        let warp = |f: f64| k * (PI * f / fs).tan();
        let (wl, wh) = (warp(band.f_lo), warp(band.f_hi));
        let (bw, w0sq) = (wh - wl, wl * wh);
        let a0 = k * k + bw * k + w0sq;
        let section = Biquad {
            b: [bw * k / a0, 0.0, -bw * k / a0],
            a: [(2.0 * w0sq - 2.0 * k * k) / a0, (k * k - bw * k + w0sq) / a0],
        };
        if !section.is_stable() {
            return Err(DspError::Unstable(section.a));
        }
        Ok(FilterSpec { order: 2, band, fs, section })
    }
}

/// Direct-form II transposed filtering with initial state `zi`.
pub fn lfilter(s: &Biquad, x: &[f64], zi: [f64; 2]) -> Vec<f64> {
    let [b0, b1, b2] = s.b;
    let [a1, a2] = s.a;
    let [mut z0, mut z1] = zi;
    x.iter()
        .map(|&v| {
            let y = b0 * v + z0;
            z0 = b1 * v - a1 * y + z1;
            z1 = b2 * v - a2 * y;
            y
        })
        .collect()
}

/// Number of samples reflected at each end before forward-backward filtering.
const PADLEN: usize = 9;

/// Zero-phase forward-backward filtering with odd-reflection padding and
/// steady-state initial conditions.
pub fn filtfilt(s: &Biquad, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= PADLEN {
        return Err(DspError::InvalidArgument(format!("filtfilt needs more than {PADLEN} samples, got {n}")));
    }
    let mut ext = Vec::with_capacity(n + 2 * PADLEN);
    ext.extend((1..=PADLEN).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=PADLEN).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = s.step_state();
    let scaled = |v: f64| [zi[0] * v, zi[1] * v];
    let mut y = lfilter(s, &ext, scaled(ext[0]));
    y.reverse();
    let mut y = lfilter(s, &y, scaled(y[0]));
    y.reverse();
    Ok(y[PADLEN..PADLEN + n].to_vec())
}

/// Zero-phase application of the designed band-pass; length is preserved.
pub fn butterworth_bandpass(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    filtfilt(&spec.section, x)
}
