use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::bvp::{gen_bvp_with_baseline, Waveform, HR_MAX_BPM, HR_MIN_BPM};
use super::scenario::ScenarioSpec;
use super::{Result, SynthError};
use crate::dsp::{estimate_hr, periodogram, BandConfig, Window};
use crate::tensor::{DiffTensor, Scalar};

const RENDER_STREAM: u64 = 1;

/// A rendered clip `[3, T, H, W]` in `[0, 1]` with its ground truth.
#[derive(Debug, Clone)]
pub struct VideoClip {
    pub clip: DiffTensor<f32>,
    pub gt_bvp: Waveform,
    pub gt_hr: f64,
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

impl VideoClip {
    pub fn frames(&self) -> usize {
        self.clip.dims()[1]
    }

    /// The clip converted to another element type.
    pub fn clip_as<T: Scalar>(&self) -> DiffTensor<T> {
        let data = self.clip.data().iter().map(|&v| T::of(v as f64)).collect();
        DiffTensor::new(data, self.clip.dims().to_vec()).expect("same shape")
    }

    /// The ground-truth waveform as a `[T]` tensor.
    pub fn bvp_as<T: Scalar>(&self) -> DiffTensor<T> {
        DiffTensor::from_f64(&self.gt_bvp.samples, [self.gt_bvp.len()]).expect("1-d")
    }

    /// Mean value of channel `c` over the resting patch, per frame.
    pub fn patch_trace(&self, c: usize) -> Vec<f64> {
        let [_, t, h, w] = self.clip.dims() else { unreachable!("clips are rank 4") };
        let (t, h, w) = (*t, *h, *w);
        let (ph, pw) = self.scenario.patch.pixels(h, w);
        let (top, left) = ((h - ph) / 2, (w - pw) / 2);
        let data = self.clip.data();
        (0..t)
            .map(|f| {
                let mut acc = 0.0;
                for y in top..top + ph {
                    let row = ((c * t + f) * h + y) * w;
                    acc += data[row + left..row + left + pw].iter().map(|&v| v as f64).sum::<f64>();
                }
                acc / (ph * pw) as f64
            })
            .collect()
    }
}

fn nominal_hr(bvp: &Waveform) -> Result<f64> {
    if let Some(hr) = bvp.hr {
        return Ok(hr);
    }
    let nfft = bvp.len().next_power_of_two().max(2048);
    let psd = periodogram(&bvp.samples, bvp.fps, nfft, Window::Hann)?;
    Ok(estimate_hr(&psd, BandConfig::from_bpm(HR_MIN_BPM, HR_MAX_BPM))?)
}

/// Composites a skin patch modulated by `bvp` onto a flat background.
///
/// Pixel value inside the patch is `skin + amplitude·gain·bvp(t)`; every
/// pixel then gets the illumination drift and Gaussian sensor noise and
/// is clamped to `[0, 1]`. A patch pushed past the border by motion is
/// clamped inside the frame and a warning is logged.
pub fn render_clip(bvp: &Waveform, spec: &ScenarioSpec, seed: u64) -> Result<VideoClip> {
    spec.validate()?;
    let (t_len, h, w) = (spec.frames, spec.height, spec.width);
    if bvp.len() != t_len || bvp.fps != spec.fps {
        return Err(SynthError::InvalidArgument(format!(
            "waveform has {} samples at {} fps, scenario wants {t_len} at {}",
            bvp.len(),
            bvp.fps,
            spec.fps
        )));
    }
    let gt_hr = nominal_hr(bvp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RENDER_STREAM);
    let motion_phase = rng.random_range(0.0..TAU);
    let drift_phase = rng.random_range(0.0..TAU);

    let (ph, pw) = spec.patch.pixels(h, w);
    let (rest_top, rest_left) = (((h - ph) / 2) as i64, ((w - pw) / 2) as i64);
    let mut clamped = false;
    let placements: Vec<(usize, usize)> = (0..t_len)
        .map(|f| {
            let arg = TAU * spec.motion.speed_hz * f as f64 / spec.fps + motion_phase;
            let dx = (spec.motion.max_shift_px * arg.sin()).round() as i64;
            let dy = (spec.motion.max_shift_px * arg.cos()).round() as i64;
            let (top, left) = (rest_top + dy, rest_left + dx);
            let top_c = top.clamp(0, (h - ph) as i64);
            let left_c = left.clamp(0, (w - pw) as i64);
            clamped |= top_c != top || left_c != left;
            (top_c as usize, left_c as usize)
        })
        .collect();
    if clamped {
        log::warn!("render_clip: motion pushed the patch past the frame border; clamped (seed {seed})");
    }
    let drift: Vec<f64> = (0..t_len)
        .map(|f| {
            let ill = spec.illumination;
            ill.amplitude * (TAU * f as f64 / (ill.period_s * spec.fps) + drift_phase).sin()
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| SynthError::InvalidArgument(e.to_string()))?;
    let mut data = vec![0f32; 3 * t_len * h * w];
    for c in 0..3 {
        for f in 0..t_len {
            let (top, left) = placements[f];
            let skin = spec.skin_color[c] + spec.amplitude * spec.channel_gains[c] * bvp.samples[f];
            let frame = &mut data[(c * t_len + f) * h * w..][..h * w];
            for y in 0..h {
                let inside_row = (top..top + ph).contains(&y);
                for x in 0..w {
                    let base = if inside_row && (left..left + pw).contains(&x) { skin } else { spec.background[c] };
                    let mut v = base + drift[f];
                    if spec.noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    frame[y * w + x] = v.clamp(0.0, 1.0) as f32;
                }
            }
        }
    }
    Ok(VideoClip {
        clip: DiffTensor::new(data, [3, t_len, h, w])?,
        gt_bvp: bvp.clone(),
        gt_hr,
        scenario: spec.clone(),
        seed,
    })
}

/// Generates the pulse for `hr` and renders it under `spec`.
pub fn synthesize_clip(hr: f64, spec: &ScenarioSpec, seed: u64) -> Result<VideoClip> {
    let bvp = gen_bvp_with_baseline(hr, spec.fps, spec.frames, seed, spec.baseline)?;
    render_clip(&bvp, spec, seed)
}
