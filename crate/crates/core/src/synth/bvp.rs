use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SynthError};

pub const HR_MIN_BPM: f64 = 40.0;
pub const HR_MAX_BPM: f64 = 180.0;

const HARMONIC_GAIN: f64 = 0.3;
const BASELINE_HZ: f64 = 0.1;

/// A sampled pulse waveform. `hr` is the nominal rate when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub fps: f64,
    pub hr: Option<f64>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Fundamental plus one harmonic at random phases, scaled to unit peak
/// magnitude.
pub fn gen_bvp(hr: f64, fps: f64, frames: usize, seed: u64) -> Result<Waveform> {
    gen_bvp_with_baseline(hr, fps, frames, seed, 0.0)
}

/// [`gen_bvp`] plus a 0.1 Hz baseline wander of amplitude `baseline`.
pub fn gen_bvp_with_baseline(hr: f64, fps: f64, frames: usize, seed: u64, baseline: f64) -> Result<Waveform> {
    if !(HR_MIN_BPM..=HR_MAX_BPM).contains(&hr) {
        return Err(SynthError::InvalidArgument(format!("heart rate {hr} bpm outside [{HR_MIN_BPM}, {HR_MAX_BPM}]")));
    }
    if !(fps > 0.0) || frames == 0 {
        return Err(SynthError::InvalidArgument(format!("need fps > 0 and frames > 0, got {fps}, {frames}")));
    }
    if !baseline.is_finite() || baseline < 0.0 {
        return Err(SynthError::InvalidArgument(format!("baseline amplitude {baseline}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi0 = rng.random_range(0.0..TAU);
    let phi1 = rng.random_range(0.0..TAU);
    let phi_b = rng.random_range(0.0..TAU);
    let f = hr / 60.0;
    let mut samples: Vec<f64> = (0..frames)
        .map(|i| {
            let t = i as f64 / fps;
            (TAU * f * t + phi0).sin() + HARMONIC_GAIN * (2.0 * TAU * f * t + phi1).sin()
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|v| *v /= peak);
    }
    if baseline > 0.0 {
        for (i, v) in samples.iter_mut().enumerate() {
            *v += baseline * (TAU * BASELINE_HZ * i as f64 / fps + phi_b).sin();
        }
    }
    Ok(Waveform { samples, fps, hr: Some(hr) })
}
