use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{BandConfig, WelchConfig};
use crate::model::{ArchConfig, DiffMode, FusionMode};
use crate::synth::{Illumination, Motion, PatchGeometry, Preset, ScenarioSpec, Split, SplitRatios};
use crate::train::{PostConfig, TrainConfig};

use super::{CliError, Result};

pub const SNAPSHOT_FILE: &str = "resolved_config.toml";
pub const SEED_ENV: &str = "PULSEFORGE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchPreset {
    #[default]
    Default,
    Reduced,
    Micro,
}

impl ArchPreset {
    pub fn config(self) -> ArchConfig {
        match self {
            ArchPreset::Default => ArchConfig::default(),
            ArchPreset::Reduced => ArchConfig::reduced(),
            ArchPreset::Micro => ArchConfig::micro(),
        }
    }
}

impl std::str::FromStr for ArchPreset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(ArchPreset::Default),
            "reduced" => Ok(ArchPreset::Reduced),
            "micro" => Ok(ArchPreset::Micro),
            _ => Err(CliError::Config(format!("unknown arch preset {s:?}"))),
        }
    }
}

/// Network widths and switches. Clip geometry comes from the scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSection {
    pub preset: ArchPreset,
    pub stem_channels: Option<usize>,
    pub stage1_channels: Option<usize>,
    pub stage2_channels: Option<usize>,
    pub alpha_fuse: Option<f64>,
    pub beta_fuse: Option<f64>,
    pub dropout: Option<f64>,
    pub diff_mode: Option<DiffMode>,
    pub fusion: Option<FusionMode>,
    pub attention: Option<bool>,
}

/// A scenario preset plus per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub preset: Preset,
    pub frames: Option<usize>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub fps: Option<f64>,
    pub hr_range: Option<[f64; 2]>,
    pub amplitude: Option<f64>,
    pub channel_gains: Option<[f64; 3]>,
    pub skin_color: Option<[f64; 3]>,
    pub background: Option<[f64; 3]>,
    pub noise_sigma: Option<f64>,
    pub baseline: Option<f64>,
    pub illumination: Option<Illumination>,
    pub motion: Option<Motion>,
    pub patch: Option<PatchGeometry>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            preset: Preset::Static,
            frames: None,
            height: None,
            width: None,
            fps: None,
            hr_range: None,
            amplitude: None,
            channel_gains: None,
            skin_color: None,
            background: None,
            noise_sigma: None,
            baseline: None,
            illumination: None,
            motion: None,
            patch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub dir: PathBuf,
    pub n_clips: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { dir: PathBuf::from("data"), n_clips: 64, split: [0.8, 0.2, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub checkpoint: PathBuf,
    pub split: Split,
    pub band: BandConfig,
    pub welch: WelchConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        let post = PostConfig::default();
        EvalSection { checkpoint: PathBuf::from("runs/best"), split: Split::Test, band: post.band, welch: post.welch }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferSection {
    pub checkpoint: PathBuf,
    pub clip: PathBuf,
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub iters: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { iters: 3 }
    }
}

/// Everything a subcommand needs, as read from a TOML file.
///
/// Precedence is flags, then file values, then `PULSEFORGE_SEED` for the
/// seed, then built-in defaults. [`RunConfig::resolve`] fills every
/// optional field so the written snapshot reproduces the run on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub data: DataSection,
    pub scenario: ScenarioSection,
    pub arch: ArchSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub infer: InferSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            threads: None,
            out: PathBuf::from("out"),
            data: DataSection::default(),
            scenario: ScenarioSection::default(),
            arch: ArchSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            infer: InferSection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills unset fields from the presets and the seed fallback chain,
    /// then validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        if self.seed.is_none() {
            self.seed = Some(match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a u64")))?,
                Err(_) => 0,
            });
        }
        let arch = self.arch.preset.config();
        let a = &mut self.arch;
        a.stem_channels.get_or_insert(arch.stem_channels);
        a.stage1_channels.get_or_insert(arch.stage1_channels);
        a.stage2_channels.get_or_insert(arch.stage2_channels);
        a.alpha_fuse.get_or_insert(arch.alpha_fuse);
        a.beta_fuse.get_or_insert(arch.beta_fuse);
        a.dropout.get_or_insert(arch.dropout);
        a.diff_mode.get_or_insert(arch.diff_mode);
        a.fusion.get_or_insert(arch.fusion);
        a.attention.get_or_insert(arch.attention);

        let spec = ScenarioSpec::preset(self.scenario.preset);
        let s = &mut self.scenario;
        s.frames.get_or_insert(arch.frames);
        s.height.get_or_insert(arch.height);
        s.width.get_or_insert(arch.width);
        s.fps.get_or_insert(spec.fps);
        s.hr_range.get_or_insert(spec.hr_range);
        s.amplitude.get_or_insert(spec.amplitude);
        s.channel_gains.get_or_insert(spec.channel_gains);
        s.skin_color.get_or_insert(spec.skin_color);
        s.background.get_or_insert(spec.background);
        s.noise_sigma.get_or_insert(spec.noise_sigma);
        s.baseline.get_or_insert(spec.baseline);
        s.illumination.get_or_insert(spec.illumination);
        s.motion.get_or_insert(spec.motion);
        s.patch.get_or_insert(spec.patch);

        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.scenario_spec().validate()?;
        self.arch_config().validate()?;
        self.split_ratios()?;
        self.train_config().validate()?;
        if self.bench.iters == 0 {
            return Err(CliError::Config("bench.iters must be at least 1".into()));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The scenario with every override applied. Call after [`Self::resolve`].
    pub fn scenario_spec(&self) -> ScenarioSpec {
        let mut spec = ScenarioSpec::preset(self.scenario.preset);
        let s = &self.scenario;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = s.$f { spec.$f = v; } )* };
        }
        set!(frames, height, width, fps, hr_range, amplitude, channel_gains, skin_color, background);
        set!(noise_sigma, baseline, illumination, motion, patch);
        spec
    }

    /// The network configuration, shaped to the scenario's clips.
    pub fn arch_config(&self) -> ArchConfig {
        let mut arch = self.arch.preset.config();
        let a = &self.arch;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = a.$f { arch.$f = v; } )* };
        }
        set!(stem_channels, stage1_channels, stage2_channels, alpha_fuse, beta_fuse, dropout);
        set!(diff_mode, fusion, attention);
        let spec = self.scenario_spec();
        arch.frames = spec.frames;
        arch.height = spec.height;
        arch.width = spec.width;
        arch
    }

    pub fn split_ratios(&self) -> Result<SplitRatios> {
        let [a, b, c] = self.data.split;
        Ok(SplitRatios::new(a, b, c)?)
    }

    /// Training settings reading `data.dir` and writing under `out`.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed(),
            dataset: self.data.dir.clone(),
            checkpoint_dir: self.out.clone(),
            ..self.train.clone()
        }
    }

    pub fn post_config(&self) -> PostConfig {
        PostConfig { band: self.eval.band, welch: self.eval.welch }
    }

    /// Writes `resolved_config.toml` into `dir`.
    pub fn write_snapshot(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}
