use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// How the four temporal differences around frame `t` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffMode {
    /// `D[t+k] − D[t+k−1]` style neighbour differences.
    Adjacent,
    /// `D[t+k] − D[t]`.
    Center,
}

/// Which branches of the fusion stem contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// Raw and differential branches weighted by `alpha_fuse` / `beta_fuse`.
    Full,
    /// Differential branch disabled: behaves as `alpha_fuse = 1`, `beta_fuse = 0`.
    RawOnly,
}

/// Architecture hyperparameters. Every parameter shape is a function of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub stem_channels: usize,
    pub stage1_channels: usize,
    pub stage2_channels: usize,
    pub alpha_fuse: f64,
    pub beta_fuse: f64,
    pub dropout: f64,
    pub diff_mode: DiffMode,
    pub fusion: FusionMode,
    pub attention: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            frames: 128,
            height: 72,
            width: 72,
            stem_channels: 32,
            stage1_channels: 64,
            stage2_channels: 128,
            alpha_fuse: 0.5,
            beta_fuse: 0.5,
            dropout: crate::nn::DEFAULT_DROPOUT,
            diff_mode: DiffMode::Adjacent,
            fusion: FusionMode::Full,
            attention: true,
        }
    }
}

pub const UPSAMPLE_FACTOR: usize = 2;

const STEM_SPATIAL: usize = 5 * 5;
const STEM_TEMPORAL: usize = 3 * 3 * 3;
const STAGE_CONV: usize = 3 * 3 * 3;
const POST_SHIFT: usize = 3 * 3;
const HEAD_CONV: usize = 3;

impl ArchConfig {
    /// The 36×36 configuration used for quick end-to-end training.
    pub fn reduced() -> Self {
        ArchConfig {
            height: 36,
            width: 36,
            stem_channels: 4,
            stage1_channels: 8,
            stage2_channels: 8,
            ..Self::default()
        }
    }

    /// Tiny configuration for finite-difference gradient checks.
    pub fn micro() -> Self {
        ArchConfig {
            frames: 16,
            height: 12,
            width: 12,
            stem_channels: 2,
            stage1_channels: 3,
            stage2_channels: 3,
            dropout: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.frames < 8 || !self.frames.is_multiple_of(2) {
            return bad(format!("frames must be even and at least 8, got {}", self.frames));
        }
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(4) || !self.width.is_multiple_of(4) {
            return bad(format!(
                "height and width must be positive multiples of 4, got {}×{}",
                self.height, self.width
            ));
        }
        if self.stem_channels == 0 || self.stage1_channels == 0 || self.stage2_channels == 0 {
            return bad("channel widths must be positive".into());
        }
        if !(self.alpha_fuse.is_finite() && self.beta_fuse.is_finite()) || self.alpha_fuse + self.beta_fuse <= 0.0 {
            return bad(format!(
                "alpha_fuse + beta_fuse must be positive, got {} + {}",
                self.alpha_fuse, self.beta_fuse
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Fusion weights actually applied, after the ablation switch.
    pub fn fusion_weights(&self) -> (f64, f64) {
        match self.fusion {
            FusionMode::Full => (self.alpha_fuse, self.beta_fuse),
            FusionMode::RawOnly => (1.0, 0.0),
        }
    }

    /// `[C, T, H, W]` of the feature map after each stage: stem, stage 1, stage 2.
    pub fn feature_shapes(&self) -> [[usize; 4]; 3] {
        let (t, h, w) = (self.frames, self.height, self.width);
        [
            [self.stem_channels, t, h, w],
            [self.stage1_channels, t, h / 2, w / 2],
            [self.stage2_channels, t / 2, h / 4, w / 4],
        ]
    }

    /// Waveform length for a clip of this configuration.
    pub fn output_len(&self) -> usize {
        self.frames / 2 * UPSAMPLE_FACTOR
    }

    /// Learnable scalars, summed layer by layer from the architecture alone.
    pub fn param_count(&self) -> usize {
        let conv = |cin: usize, cout: usize, taps: usize| cout * cin * taps + cout;
        let bn = |c: usize| 2 * c;
        let (c0, c1, c2) = (self.stem_channels, self.stage1_channels, self.stage2_channels);
        let stems =
            conv(3, c0, STEM_SPATIAL) + conv(12, c0, STEM_SPATIAL) + 2 * conv(c0, c0, STEM_TEMPORAL) + 4 * bn(c0);
        let stage = |cin: usize, cout: usize| {
            conv(cin, cout, STAGE_CONV) + bn(cout) + (cout + 1) + conv(cout, cout, POST_SHIFT)
        };
        let head = conv(c2, c2, HEAD_CONV) + c2 + 1;
        stems + stage(c0, c1) + stage(c1, c2) + head
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(format!("arch.{k}"), v);
        };
        put("frames", self.frames.to_string());
        put("height", self.height.to_string());
        put("width", self.width.to_string());
        put("stem_channels", self.stem_channels.to_string());
        put("stage1_channels", self.stage1_channels.to_string());
        put("stage2_channels", self.stage2_channels.to_string());
        put("alpha_fuse", format!("{:?}", self.alpha_fuse));
        put("beta_fuse", format!("{:?}", self.beta_fuse));
        put("dropout", format!("{:?}", self.dropout));
        put(
            "diff_mode",
            match self.diff_mode {
                DiffMode::Adjacent => "adjacent",
                DiffMode::Center => "center",
            }
            .into(),
        );
        put(
            "fusion",
            match self.fusion {
                FusionMode::Full => "full",
                FusionMode::RawOnly => "raw-only",
            }
            .into(),
        );
        put("attention", self.attention.to_string());
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self, ModelError> {
        fn get<V: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<V, ModelError> {
            let full = format!("arch.{key}");
            let raw = kv.get(&full).ok_or_else(|| ModelError::Config(format!("missing key {full}")))?;
            raw.parse().map_err(|_| ModelError::Config(format!("bad value for {full}: {raw:?}")))
        }
        let diff_mode = match get::<String>(kv, "diff_mode")?.as_str() {
            "adjacent" => DiffMode::Adjacent,
            "center" => DiffMode::Center,
            other => return Err(ModelError::Config(format!("unknown diff_mode {other:?}"))),
        };
        let fusion = match get::<String>(kv, "fusion")?.as_str() {
            "full" => FusionMode::Full,
            "raw-only" => FusionMode::RawOnly,
            other => return Err(ModelError::Config(format!("unknown fusion {other:?}"))),
        };
        let cfg = ArchConfig {
            frames: get(kv, "frames")?,
            height: get(kv, "height")?,
            width: get(kv, "width")?,
            stem_channels: get(kv, "stem_channels")?,
            stage1_channels: get(kv, "stage1_channels")?,
            stage2_channels: get(kv, "stage2_channels")?,
            alpha_fuse: get(kv, "alpha_fuse")?,
            beta_fuse: get(kv, "beta_fuse")?,
            dropout: get(kv, "dropout")?,
            diff_mode,
            fusion,
            attention: get(kv, "attention")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
