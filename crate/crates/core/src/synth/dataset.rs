use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvp::Waveform;
use super::render::{synthesize_clip, VideoClip};
use super::scenario::ScenarioSpec;
use super::{Result, SynthError};
use crate::tensor::serialize;
use crate::tensor::DiffTensor;

pub const DATASET_MANIFEST: &str = "manifest.txt";
pub const DATASET_FORMAT: &str = "pulseforge-dataset-1";
const CLIP_DIR: &str = "clips";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(SynthError::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidArgument(format!(
                "split ratios {parts:?} must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }

    /// Clip counts per split; train and val are rounded, test takes the rest.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let train = ((n as f64 * self.train).round() as usize).min(n);
        let val = ((n as f64 * self.val).round() as usize).min(n - train);
        [train, val, n - train - val]
    }
}

/// One clip entry; paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub id: usize,
    pub split: Split,
    pub seed: u64,
    pub gt_hr: f64,
    pub video: PathBuf,
    pub bvp: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub scenario: ScenarioSpec,
    pub clips: Vec<ClipRecord>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let scenario = serde_json::to_string(&self.scenario).expect("scenario serializes");
        let r = self.ratios;
        let _ = writeln!(s, "format={DATASET_FORMAT}");
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "n_clips={}", self.clips.len());
        let _ = writeln!(s, "split.train={}\nsplit.val={}\nsplit.test={}", r.train, r.val, r.test);
        let _ = writeln!(s, "scenario={scenario}");
        for c in &self.clips {
            let _ = writeln!(
                s,
                "clip id={} split={} seed={} gt_hr={} video={} bvp={}",
                c.id,
                c.split.name(),
                c.seed,
                c.gt_hr,
                c.video.display(),
                c.bvp.display()
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| SynthError::Manifest(m);
        let mut format = None;
        let (mut seed, mut n_clips, mut scenario) = (None, None, None);
        let (mut train, mut val, mut test) = (None, None, None);
        let mut clips = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("clip ") {
                clips.push(parse_record(rest).map_err(|m| bad(format!("line {}: {m}", lineno + 1)))?);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
            match k {
                "format" => format = Some(v.to_string()),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?),
                "n_clips" => n_clips = Some(v.parse::<usize>().map_err(|e| bad(format!("n_clips: {e}")))?),
                "split.train" => train = Some(num(v)?),
                "split.val" => val = Some(num(v)?),
                "split.test" => test = Some(num(v)?),
                "scenario" => {
                    let spec: ScenarioSpec = serde_json::from_str(v).map_err(|e| bad(format!("scenario: {e}")))?;
                    scenario = Some(spec);
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        match format.as_deref() {
            Some(DATASET_FORMAT) => {}
            other => return Err(bad(format!("format {other:?}, expected {DATASET_FORMAT}"))),
        }
        let missing = |k: &str| bad(format!("missing key {k}"));
        let ratios = SplitRatios {
            train: train.ok_or_else(|| missing("split.train"))?,
            val: val.ok_or_else(|| missing("split.val"))?,
            test: test.ok_or_else(|| missing("split.test"))?,
        };
        ratios.validate()?;
        let manifest = DatasetManifest {
            seed: seed.ok_or_else(|| missing("seed"))?,
            ratios,
            scenario: scenario.ok_or_else(|| missing("scenario"))?,
            clips,
        };
        manifest.scenario.validate()?;
        let n = n_clips.ok_or_else(|| missing("n_clips"))?;
        if n != manifest.clips.len() {
            return Err(bad(format!("n_clips={n} but {} clip records", manifest.clips.len())));
        }
        for (i, c) in manifest.clips.iter().enumerate() {
            if c.id != i {
                return Err(bad(format!("clip record {i} has id {}", c.id)));
            }
        }
        Ok(manifest)
    }

    pub fn records(&self, split: Split) -> impl Iterator<Item = &ClipRecord> {
        self.clips.iter().filter(move |c| c.split == split)
    }
}

fn parse_record(rest: &str) -> std::result::Result<ClipRecord, String> {
    let (mut id, mut split, mut seed, mut hr, mut video, mut bvp) = (None, None, None, None, None, None);
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| format!("bad field {field:?}"))?;
        match k {
            "id" => id = Some(v.parse::<usize>().map_err(|e| format!("id: {e}"))?),
            "split" => split = Some(v.parse::<Split>().map_err(|e| e.to_string())?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| format!("seed: {e}"))?),
            "gt_hr" => hr = Some(v.parse::<f64>().map_err(|e| format!("gt_hr: {e}"))?),
            "video" => video = Some(PathBuf::from(v)),
            "bvp" => bvp = Some(PathBuf::from(v)),
            other => return Err(format!("unknown clip field {other:?}")),
        }
    }
    let need = |k: &str| format!("clip record missing {k}");
    Ok(ClipRecord {
        id: id.ok_or_else(|| need("id"))?,
        split: split.ok_or_else(|| need("split"))?,
        seed: seed.ok_or_else(|| need("seed"))?,
        gt_hr: hr.ok_or_else(|| need("gt_hr"))?,
        video: video.ok_or_else(|| need("video"))?,
        bvp: bvp.ok_or_else(|| need("bvp"))?,
    })
}

/// A dataset directory with a parsed manifest. Clips load on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let text = fs::read_to_string(root.join(DATASET_MANIFEST))?;
        let manifest = DatasetManifest::parse(&text)?;
        for c in &manifest.clips {
            for p in [&c.video, &c.bvp] {
                if p.is_absolute() || p.components().any(|x| matches!(x, std::path::Component::ParentDir)) {
                    return Err(SynthError::Manifest(format!(
                        "clip {}: path {} escapes the dataset",
                        c.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(Dataset { root: root.to_path_buf(), manifest })
    }

    pub fn records(&self, split: Split) -> Vec<&ClipRecord> {
        self.manifest.records(split).collect()
    }

    pub fn load_clip(&self, record: &ClipRecord) -> Result<VideoClip> {
        let spec = &self.manifest.scenario;
        let clip: DiffTensor<f32> = serialize::load(&self.root.join(&record.video))?;
        let bvp: DiffTensor<f64> = serialize::load(&self.root.join(&record.bvp))?;
        let want = [3, spec.frames, spec.height, spec.width];
        if clip.dims() != want {
            return Err(SynthError::Manifest(format!(
                "clip {}: video shape {:?}, expected {want:?}",
                record.id,
                clip.dims()
            )));
        }
        if bvp.dims() != [spec.frames] {
            return Err(SynthError::Manifest(format!(
                "clip {}: bvp shape {:?}, expected [{}]",
                record.id,
                bvp.dims(),
                spec.frames
            )));
        }
        Ok(VideoClip {
            clip,
            gt_bvp: Waveform { samples: bvp.to_vec(), fps: spec.fps, hr: Some(record.gt_hr) },
            gt_hr: record.gt_hr,
            scenario: spec.clone(),
            seed: record.seed,
        })
    }

    /// Loads every clip of `split` in manifest order.
    pub fn load_split(&self, split: Split) -> Result<Vec<VideoClip>> {
        self.records(split).into_par_iter().map(|r| self.load_clip(r)).collect()
    }
}

/// Renders `n_clips` clips under `spec` into `dir` and writes the manifest.
///
/// A master stream draws each clip's seed and heart rate in order, so the
/// parallel render is byte-for-byte reproducible.
pub fn build_dataset(
    dir: &Path,
    n_clips: usize,
    spec: &ScenarioSpec,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    ratios.validate()?;
    let [n_train, n_val, _] = ratios.counts(n_clips);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = spec.hr_range;
    let clips: Vec<ClipRecord> = (0..n_clips)
        .map(|id| {
            let clip_seed = master.next_u64();
            let gt_hr = if hi > lo { master.random_range(lo..hi) } else { lo };
            let split = if id < n_train {
                Split::Train
            } else if id < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            ClipRecord {
                id,
                split,
                seed: clip_seed,
                gt_hr,
                video: Path::new(CLIP_DIR).join(format!("clip_{id:05}.pft")),
                bvp: Path::new(CLIP_DIR).join(format!("clip_{id:05}_bvp.pft")),
            }
        })
        .collect();
    fs::create_dir_all(dir.join(CLIP_DIR))?;
    clips.par_iter().try_for_each(|r| -> Result<()> {
        let clip = synthesize_clip(r.gt_hr, spec, r.seed)?;
        serialize::save(&dir.join(&r.video), &clip.clip)?;
        serialize::save(&dir.join(&r.bvp), &clip.bvp_as::<f64>())?;
        Ok(())
    })?;
    let manifest = DatasetManifest { seed, ratios, scenario: spec.clone(), clips };
    fs::write(dir.join(DATASET_MANIFEST), manifest.to_text())?;
    Ok(Dataset { root: dir.to_path_buf(), manifest })
}

/// Opens an externally produced directory and checks every clip loads
/// with the declared geometry.
pub fn import_dataset(dir: &Path) -> Result<Dataset> {
    let ds = Dataset::open(dir)?;
    ds.manifest.clips.par_iter().try_for_each(|r| ds.load_clip(r).map(|_| ()))?;
    Ok(ds)
}
