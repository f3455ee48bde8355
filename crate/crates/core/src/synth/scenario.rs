use serde::{Deserialize, Serialize};

use super::bvp::{HR_MAX_BPM, HR_MIN_BPM};
use super::{Result, SynthError};

/// Pulsatile gain per (R, G, B) channel.
pub const CHANNEL_GAINS: [f64; 3] = [0.5, 1.0, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Static,
    Motion,
    Lighting,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Static, Preset::Motion, Preset::Lighting, Preset::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Static => "static",
            Preset::Motion => "motion",
            Preset::Lighting => "lighting",
            Preset::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SynthError::InvalidArgument(format!("unknown preset {s:?}")))
    }
}

/// Global additive sinusoid applied to every pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Illumination {
    pub amplitude: f64,
    pub period_s: f64,
}

/// Sinusoidal integer-pixel translation of the skin patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Motion {
    pub max_shift_px: f64,
    pub speed_hz: f64,
}

/// Patch size as a fraction of the frame, centred at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchGeometry {
    pub height_frac: f64,
    pub width_frac: f64,
}

impl PatchGeometry {
    /// Patch extent in pixels, at least one pixel each way.
    pub fn pixels(&self, height: usize, width: usize) -> (usize, usize) {
        let ph = ((height as f64 * self.height_frac).round() as usize).clamp(1, height);
        let pw = ((width as f64 * self.width_frac).round() as usize).clamp(1, width);
        (ph, pw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub preset: Preset,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub hr_range: [f64; 2],
    pub amplitude: f64,
    pub channel_gains: [f64; 3],
    pub skin_color: [f64; 3],
    pub background: [f64; 3],
    pub illumination: Illumination,
    pub motion: Motion,
    pub noise_sigma: f64,
    pub patch: PatchGeometry,
    pub baseline: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::preset(Preset::Static)
    }
}

impl ScenarioSpec {
    pub fn preset(preset: Preset) -> Self {
        let still = Motion { max_shift_px: 0.0, speed_hz: 0.0 };
        let moving = Motion { max_shift_px: 4.0, speed_hz: 0.25 };
        let flat = Illumination { amplitude: 0.0, period_s: 4.0 };
        let drifting = Illumination { amplitude: 0.05, period_s: 4.0 };
        let (motion, illumination, noise_sigma) = match preset {
            Preset::Static => (still, flat, 0.002),
            Preset::Motion => (moving, flat, 0.002),
            Preset::Lighting => (still, drifting, 0.002),
            Preset::Mixed => (moving, drifting, 0.01),
        };
        ScenarioSpec {
            preset,
            frames: 128,
            height: 72,
            width: 72,
            fps: 30.0,
            hr_range: [55.0, 110.0],
            amplitude: 0.02,
            channel_gains: CHANNEL_GAINS,
            skin_color: [0.78, 0.57, 0.46],
            background: [0.25, 0.25, 0.28],
            illumination,
            motion,
            noise_sigma,
            patch: PatchGeometry { height_frac: 0.5, width_frac: 0.5 },
            baseline: 0.0,
        }
    }

    /// Same scenario at a different frame size.
    pub fn with_size(mut self, height: usize, width: usize) -> Self {
        self.height = height;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidArgument(m));
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return bad(format!("empty clip {}x{}x{}", self.frames, self.height, self.width));
        }
        if !(self.fps > 0.0) {
            return bad(format!("fps {}", self.fps));
        }
        let [lo, hi] = self.hr_range;
        if !(HR_MIN_BPM <= lo && lo <= hi && hi <= HR_MAX_BPM) {
            return bad(format!("hr_range [{lo}, {hi}] outside [{HR_MIN_BPM}, {HR_MAX_BPM}]"));
        }
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return bad(format!("amplitude {}", self.amplitude));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise sigma {}", self.noise_sigma));
        }
        if !self.baseline.is_finite() || self.baseline < 0.0 {
            return bad(format!("baseline {}", self.baseline));
        }
        let colors = self.channel_gains.iter().chain(&self.skin_color).chain(&self.background);
        if colors.clone().any(|c| !c.is_finite() || *c < 0.0) {
            return bad("gains and colours must be finite and non-negative".into());
        }
        if self.skin_color.iter().chain(&self.background).any(|c| *c > 1.0) {
            return bad("colours must lie in [0, 1]".into());
        }
        let Illumination { amplitude, period_s } = self.illumination;
        if !amplitude.is_finite() || amplitude < 0.0 || !(period_s > 0.0) {
            return bad(format!("illumination amplitude {amplitude}, period {period_s}"));
        }
        let Motion { max_shift_px, speed_hz } = self.motion;
        if !max_shift_px.is_finite() || max_shift_px < 0.0 || !speed_hz.is_finite() || speed_hz < 0.0 {
            return bad(format!("motion shift {max_shift_px}, speed {speed_hz}"));
        }
        let PatchGeometry { height_frac, width_frac } = self.patch;
        if !(height_frac > 0.0 && height_frac <= 1.0 && width_frac > 0.0 && width_frac <= 1.0) {
            return bad(format!("patch fractions {height_frac}, {width_frac} must lie in (0, 1]"));
        }
        Ok(())
    }
}
