use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::model::Model;
use crate::synth::{build_dataset, Dataset, DATASET_MANIFEST};
use crate::tensor::{no_grad, serialize, DiffTensor, Scalar};
use crate::train::{
    checkpoint_precision, estimate_clip_hr, evaluate_checkpoint, train, EvalReport, Precision, TrainSummary,
};

use super::bench::{run_bench, BenchReport};
use super::gradsuite::{gradient_suite, SuiteRow};
use super::{CliError, Result, RunConfig};

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Renders `data.n_clips` clips into `out`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Dataset> {
    let mut snap = cfg.clone();
    snap.data.dir = cfg.out.clone();
    snap.write_snapshot(&cfg.out)?;
    let ds = build_dataset(&cfg.out, cfg.data.n_clips, &cfg.scenario_spec(), cfg.split_ratios()?, cfg.seed())?;
    log::info!("wrote {} clips to {}", ds.manifest.clips.len(), cfg.out.display());
    Ok(ds)
}

fn require_dataset(dir: &Path) -> Result<()> {
    let manifest = dir.join(DATASET_MANIFEST);
    if !manifest.is_file() {
        return Err(CliError::Io(format!("{}: no dataset manifest found", manifest.display())));
    }
    Ok(())
}

/// Trains on `data.dir`, writing the log and checkpoints into `out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    require_dataset(&cfg.data.dir)?;
    cfg.write_snapshot(&cfg.out)?;
    let summary = train(&cfg.train_config(), &cfg.arch_config())?;
    log::info!("best epoch {} of {}", summary.best_epoch, summary.log.len());
    Ok(summary)
}

/// Scores `eval.checkpoint` on one split of `data.dir`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    require_dataset(&cfg.data.dir)?;
    cfg.write_snapshot(&cfg.out)?;
    let report = evaluate_checkpoint(&cfg.eval.checkpoint, &cfg.data.dir, cfg.eval.split, &cfg.post_config())?;
    report.write(&cfg.out)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct InferOutput {
    pub hr_bpm: f64,
    pub fps: f64,
    pub waveform: Vec<f64>,
    pub waveform_path: PathBuf,
}

fn predict_file<T: Scalar>(checkpoint: &Path, clip: &Path) -> Result<Vec<f64>> {
    let (model, _) = Model::<T>::load(checkpoint)?;
    let x: DiffTensor<T> = serialize::load(clip)?;
    let x = match x.dims() {
        [3, t, h, w] => {
            let d = [1, 3, *t, *h, *w];
            x.reshape(d)?
        }
        [1, 3, _, _, _] => x,
        d => return Err(CliError::Config(format!("{}: expected a [3,T,H,W] clip, got {d:?}", clip.display()))),
    };
    let wave = no_grad(|| model.predict(&x))?;
    Ok(wave.to_f64_vec())
}

/// Runs a checkpoint on one clip file and estimates its heart rate.
pub fn cmd_infer(cfg: &RunConfig) -> Result<InferOutput> {
    cfg.write_snapshot(&cfg.out)?;
    let (ckpt, clip) = (&cfg.infer.checkpoint, &cfg.infer.clip);
    let waveform = match checkpoint_precision(ckpt)? {
        Precision::F32 => predict_file::<f32>(ckpt, clip)?,
        Precision::F64 => predict_file::<f64>(ckpt, clip)?,
    };
    let fps = cfg.infer.fps.unwrap_or(cfg.scenario_spec().fps);
    let hr_bpm = estimate_clip_hr(&waveform, fps, &cfg.post_config())?;
    let waveform_path = cfg.out.join("waveform.pft");
    serialize::save(&waveform_path, &DiffTensor::<f64>::from_f64(&waveform, [waveform.len()])?)
        .map_err(|e| CliError::Io(format!("{}: {e}", waveform_path.display())))?;
    let mut txt = format!("# fps={fps} hr_bpm={hr_bpm}\n");
    for v in &waveform {
        let _ = writeln!(txt, "{v}");
    }
    write(&cfg.out.join("waveform.txt"), txt)?;
    Ok(InferOutput { hr_bpm, fps, waveform, waveform_path })
}

/// Runs the gradient suite and writes `gradcheck.csv`.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Vec<SuiteRow>> {
    cfg.write_snapshot(&cfg.out)?;
    let rows = gradient_suite(cfg.seed())?;
    let mut csv = String::from("op,checked,skipped,max_rel_err,max_abs_err,pass\n");
    for r in &rows {
        let _ =
            writeln!(csv, "{},{},{},{:e},{:e},{}", r.op, r.checked, r.skipped, r.max_rel_err, r.max_abs_err, r.pass);
    }
    write(&cfg.out.join("gradcheck.csv"), csv)?;
    Ok(rows)
}

/// Times the kernels and the forward pass, writing `bench.json`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.write_snapshot(&cfg.out)?;
    let report = run_bench(&cfg.arch_config(), cfg.bench.iters, cfg.seed())?;
    write(&cfg.out.join("bench.json"), serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(report)
}
