use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{butterworth_bandpass, estimate_hr, pearson_corr, welch_psd, BandConfig, FilterSpec, WelchConfig};
use crate::model::{parse_kv, Model, ModelError, MANIFEST_FILE, WEIGHTS_FILE};
use crate::synth::{Dataset, Split, VideoClip};
use crate::tensor::{no_grad, Scalar};

use super::config::Precision;
use super::{io_err, Result, TrainError};

/// Post-processing applied to predicted waveforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostConfig {
    pub band: BandConfig,
    pub welch: WelchConfig,
}

impl Default for PostConfig {
    fn default() -> Self {
        PostConfig { band: BandConfig::FILTER, welch: WelchConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRow {
    pub id: usize,
    pub gt_hr: f64,
    pub pred_hr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    /// Missing with fewer than two clips or a constant column.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ClipRow>,
    pub metrics: Metrics,
    pub config_fingerprint: String,
}

/// MAE, RMSE, MAPE (percent) and Pearson ρ over `rows` in the given order.
pub fn compute_metrics(rows: &[ClipRow]) -> Result<Metrics> {
    if rows.is_empty() {
        return Err(TrainError::Config("no clips to evaluate".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.gt_hr > 0.0) || !r.pred_hr.is_finite()) {
        return Err(TrainError::Config(format!("clip {}: gt {} pred {}", r.id, r.gt_hr, r.pred_hr)));
    }
    let n = rows.len() as f64;
    let err: Vec<f64> = rows.iter().map(|r| r.pred_hr - r.gt_hr).collect();
    let mae = err.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mape = rows.iter().map(|r| (r.pred_hr - r.gt_hr).abs() / r.gt_hr).sum::<f64>() / n * 100.0;
    let rho = if rows.len() < 2 {
        None
    } else {
        let gt: Vec<f64> = rows.iter().map(|r| r.gt_hr).collect();
        let pred: Vec<f64> = rows.iter().map(|r| r.pred_hr).collect();
        pearson_corr(&gt, &pred)
    };
    Ok(Metrics { mae, rmse, mape, rho })
}

/// Filter, Welch spectrum and peak pick on one predicted waveform. A
/// signal shorter than the Welch segment is analysed as one segment.
pub fn estimate_clip_hr(wave: &[f64], fps: f64, post: &PostConfig) -> Result<f64> {
    let spec = FilterSpec::bandpass(post.band, fps)?;
    let filtered = butterworth_bandpass(wave, &spec)?;
    let mut welch = post.welch;
    if filtered.len() < welch.segment {
        welch.segment = filtered.len();
        welch.overlap = welch.segment / 2;
        welch.nfft = welch.nfft.max(welch.segment);
    }
    let psd = welch_psd(&filtered, fps, &welch)?;
    Ok(estimate_hr(&psd, post.band)?)
}

/// Eval-mode predictions for every clip. Rows come back sorted by id so
/// the aggregates do not depend on input order.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    clips: &[(usize, &VideoClip)],
    post: &PostConfig,
    fingerprint: &str,
) -> Result<EvalReport> {
    let mut rows = clips
        .par_iter()
        .map(|&(id, clip)| -> Result<ClipRow> {
            let pred = no_grad(|| model.predict(&clip.clip_as::<T>()))?;
            let pred_hr = estimate_clip_hr(&pred.to_f64_vec(), clip.gt_bvp.fps, post)?;
            Ok(ClipRow { id, gt_hr: clip.gt_hr, pred_hr })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.id);
    let metrics = compute_metrics(&rows)?;
    Ok(EvalReport { rows, metrics, config_fingerprint: fingerprint.to_string() })
}

/// Loads a checkpoint in its stored precision and evaluates it on one
/// split of `dataset`.
pub fn evaluate_checkpoint(checkpoint: &Path, dataset: &Path, split: Split, post: &PostConfig) -> Result<EvalReport> {
    let ds = Dataset::open(dataset)?;
    let records = ds.records(split);
    let clips = records.iter().map(|r| ds.load_clip(r)).collect::<std::result::Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, &VideoClip)> = records.iter().map(|r| r.id).zip(clips.iter()).collect();
    let weights = checkpoint.join(WEIGHTS_FILE);
    let bytes = fs::read(&weights).map_err(io_err(&weights))?;
    let fp = fingerprint(&[&bytes, &serde_json::to_vec(post).expect("post serializes")]);
    match checkpoint_precision(checkpoint)? {
        Precision::F32 => evaluate(&Model::<f32>::load(checkpoint)?.0, &pairs, post, &fp),
        Precision::F64 => evaluate(&Model::<f64>::load(checkpoint)?.0, &pairs, post, &fp),
    }
}

/// Element type recorded in a checkpoint manifest.
pub fn checkpoint_precision(checkpoint: &Path) -> Result<Precision> {
    let path = checkpoint.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let kv = parse_kv(&text).map_err(|e| TrainError::Model(ModelError::Checkpoint(e)))?;
    match kv.get("dtype").map(String::as_str) {
        Some("f32") => Ok(Precision::F32),
        Some("f64") => Ok(Precision::F64),
        other => Err(TrainError::Model(ModelError::Checkpoint(format!("unknown dtype {other:?}")))),
    }
}

/// FNV-1a over the concatenated byte strings, as 16 hex digits.
pub(crate) fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in parts {
        for &b in *p {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

impl EvalReport {
    /// Writes `report.json`, `clips.csv` and `pred_vs_gt.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        let p = dir.join("report.json");
        fs::write(&p, json).map_err(io_err(&p))?;
        let mut csv = String::from("id,gt_hr,pred_hr,abs_err\n");
        let mut plot = String::from("# pred_hr gt_hr\n");
        for r in &self.rows {
            let _ = writeln!(csv, "{},{},{},{}", r.id, r.gt_hr, r.pred_hr, (r.pred_hr - r.gt_hr).abs());
            let _ = writeln!(plot, "{} {}", r.pred_hr, r.gt_hr);
        }
        let p = dir.join("clips.csv");
        fs::write(&p, csv).map_err(io_err(&p))?;
        let p = dir.join("pred_vs_gt.txt");
        fs::write(&p, plot).map_err(io_err(&p))?;
        Ok(())
    }
}
