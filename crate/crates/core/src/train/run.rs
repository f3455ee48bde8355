use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::BandConfig;
use crate::losses::LossError;
use crate::losses::{batch_loss, HrGrid, LossContext, PmfNorm, PsdBasis};
use crate::model::{ArchConfig, CheckpointMeta, Model, ModelError};
use crate::nn::Mode;
use crate::synth::{Dataset, Split, VideoClip};
use crate::tensor::{DiffTensor, Scalar, TensorError};

use super::adamw::{clip_grad_norm, AdamW};
use super::config::{Precision, TrainConfig};
use super::eval::{evaluate, PostConfig};
use super::{io_err, Result, TrainError};

pub const LOG_FILE: &str = "train_log.csv";
pub const BEST_DIR: &str = "best";
pub const FINAL_DIR: &str = "final";
const LOG_HEADER: &str = "epoch,l_time,l_ce,l_hr,beta,total,val_mae,grad_norm,lr";
const DROPOUT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// Batch means of the loss components for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_time: f64,
    pub l_ce: f64,
    pub l_hr: f64,
    pub beta: f64,
    pub total: f64,
    pub val_mae: Option<f64>,
    /// Mean gradient norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
}

impl EpochLog {
    fn csv_row(&self) -> String {
        let val = self.val_mae.map_or_else(String::new, |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch, self.l_time, self.l_ce, self.l_hr, self.beta, self.total, val, self.grad_norm, self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub model: Model<T>,
    pub best: Model<T>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Concatenates `[3, T, H, W]` clips into a `[B, 3, T, H, W]` batch.
pub fn stack_clips<T: Scalar>(clips: &[&VideoClip]) -> Result<DiffTensor<T>> {
    let first = clips.first().ok_or_else(|| TrainError::Config("empty batch".into()))?;
    let dims = first.clip.dims().to_vec();
    let mut data = Vec::with_capacity(clips.len() * first.clip.numel());
    for c in clips {
        if c.clip.dims() != dims {
            return Err(TrainError::Config(format!("clip shapes {:?} and {:?} in one batch", dims, c.clip.dims())));
        }
        data.extend(c.clip.data().iter().map(|&v| T::of(v as f64)));
    }
    let mut shape = vec![clips.len()];
    shape.extend(dims);
    Ok(DiffTensor::new(data, shape)?)
}

fn finite_or(value: f64, epoch: usize, batch: usize, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFinite { epoch, batch, detail: format!("{what} = {value}") })
    }
}

/// Tags tensor-level non-finite failures with the epoch and batch.
fn with_position(e: TrainError, epoch: usize, batch: usize) -> TrainError {
    let nonfinite = |t: &TensorError| matches!(t, TensorError::NonFinite { .. });
    match &e {
        TrainError::Tensor(t) | TrainError::Model(ModelError::Tensor(t)) | TrainError::Loss(LossError::Tensor(t))
            if nonfinite(t) =>
        {
            TrainError::NonFinite { epoch, batch, detail: t.to_string() }
        }
        _ => e,
    }
}

/// Runs the full schedule on in-memory clips.
///
/// Each epoch recomputes β, reshuffles with a seeded stream, and takes one
/// clipped AdamW step per batch. `on_epoch` sees each finished epoch and
/// whether it is the new best; the best epoch minimises validation MAE,
/// or the training total when `val` is empty.
pub fn train_model<T: Scalar>(
    cfg: &TrainConfig,
    arch: &ArchConfig,
    train_clips: &[VideoClip],
    val: &[(usize, &VideoClip)],
    mut on_epoch: impl FnMut(&EpochLog, &Model<T>, bool) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_clips.is_empty() {
        return Err(TrainError::Config("training split is empty".into()));
    }
    let fps = train_clips[0].gt_bvp.fps;
    let mut model = Model::<T>::new(arch.clone(), cfg.seed)?;
    let basis = PsdBasis::<T>::new(arch.frames, fps, BandConfig::HEART_RATE, HrGrid::default(), PmfNorm::Sum)?;
    let ctx = LossContext { basis, sigma: cfg.hr_sigma };
    let post = PostConfig { band: cfg.band, ..PostConfig::default() };
    let gt_waves: Vec<DiffTensor<T>> = train_clips.iter().map(|c| c.bvp_as::<T>()).collect();

    let mut adam = AdamW::new(cfg.optimizer(), &model.parameters().iter().map(|(_, p)| *p).collect::<Vec<_>>());
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);

    let mut order: Vec<usize> = (0..train_clips.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model<T>)> = None;
    for epoch in 1..=cfg.epochs {
        let schedule = cfg.schedule(epoch);
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 4];
        let mut beta = 0.0;
        let mut norm_sum = 0.0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (b, idx) in batches.iter().enumerate() {
            let clips: Vec<&VideoClip> = idx.iter().map(|&i| &train_clips[i]).collect();
            let x = stack_clips::<T>(&clips)?;
            let waves: Vec<DiffTensor<T>> = idx.iter().map(|&i| gt_waves[i].clone()).collect();
            let hrs: Vec<f64> = clips.iter().map(|c| c.gt_hr).collect();
            model.zero_grad();
            let diag = |e: TrainError| with_position(e, epoch, b + 1);
            let pred = model.forward(&x, Mode::Train, &mut dropout_rng).map_err(|e| diag(e.into()))?;
            let parts = batch_loss(&pred, &waves, &hrs, &schedule, &ctx).map_err(|e| diag(e.into()))?;
            let total = parts.total.item().as_f64();
            finite_or(total, epoch, b + 1, "total loss")?;
            parts.total.backward().map_err(|e| diag(e.into()))?;
            let mut grads: Vec<Vec<f64>> = model
                .parameters()
                .iter()
                .map(|(_, p)| p.grad_or_zeros().iter().map(|g| g.as_f64()).collect())
                .collect();
            let norm = if cfg.grad_clip > 0.0 {
                clip_grad_norm(&mut grads, cfg.grad_clip)
            } else {
                grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
            };
            finite_or(norm, epoch, b + 1, "gradient norm")?;
            let mut params: Vec<&mut DiffTensor<T>> = model.parameters_mut().into_iter().map(|(_, p)| p).collect();
            adam.apply(&mut params, &grads, lr)?;
            let w = idx.len() as f64;
            for (s, v) in sums.iter_mut().zip([parts.l_time, parts.l_ce, parts.l_hr, total]) {
                *s += w * v;
            }
            beta = parts.beta;
            norm_sum += norm;
        }
        let n = train_clips.len() as f64;
        let val_mae = if val.is_empty() { None } else { Some(evaluate(&model, val, &post, "")?.metrics.mae) };
        let entry = EpochLog {
            epoch,
            l_time: sums[0] / n,
            l_ce: sums[1] / n,
            l_hr: sums[2] / n,
            beta,
            total: sums[3] / n,
            val_mae,
            grad_norm: norm_sum / batches.len() as f64,
            lr,
        };
        log::info!(
            "epoch {epoch}/{}: total {:.4} time {:.4} ce {:.4} hr {:.4} beta {:.4} val_mae {:?}",
            cfg.epochs,
            entry.total,
            entry.l_time,
            entry.l_ce,
            entry.l_hr,
            entry.beta,
            entry.val_mae
        );
        let score = entry.val_mae.unwrap_or(entry.total);
        let improved = best.as_ref().is_none_or(|(s, _, _)| score < *s);
        if improved {
            best = Some((score, epoch, model.clone()));
        }
        on_epoch(&entry, &model, improved)?;
        log.push(entry);
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, best: best_model, best_epoch, log })
}

/// What a disk-backed run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dir: PathBuf,
    pub final_dir: PathBuf,
    pub log_path: PathBuf,
}

/// Trains on the dataset named in `cfg`, writing the CSV log and the
/// best and final checkpoints under `cfg.checkpoint_dir`.
pub fn train(cfg: &TrainConfig, arch: &ArchConfig) -> Result<TrainSummary> {
    match cfg.precision {
        Precision::F32 => train_to_disk::<f32>(cfg, arch),
        Precision::F64 => train_to_disk::<f64>(cfg, arch),
    }
}

fn train_to_disk<T: Scalar>(cfg: &TrainConfig, arch: &ArchConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.dataset)?;
    let spec = &ds.manifest.scenario;
    if (spec.frames, spec.height, spec.width) != (arch.frames, arch.height, arch.width) {
        return Err(TrainError::Config(format!(
            "dataset clips are {}x{}x{} but the architecture expects {}x{}x{}",
            spec.frames, spec.height, spec.width, arch.frames, arch.height, arch.width
        )));
    }
    let train_clips = ds.load_split(Split::Train)?;
    let val_records = ds.records(Split::Val);
    let val_clips = ds.load_split(Split::Val)?;
    let val: Vec<(usize, &VideoClip)> = val_records.iter().map(|r| r.id).zip(val_clips.iter()).collect();

    let out = &cfg.checkpoint_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let log_path = out.join(LOG_FILE);
    fs::write(&log_path, format!("{LOG_HEADER}\n")).map_err(io_err(&log_path))?;
    let (best_dir, final_dir) = (out.join(BEST_DIR), out.join(FINAL_DIR));
    let seed = cfg.seed;
    let outcome = train_model::<T>(cfg, arch, &train_clips, &val, |entry, model, improved| {
        let mut f = OpenOptions::new().append(true).open(&log_path).map_err(io_err(&log_path))?;
        writeln!(f, "{}", entry.csv_row()).map_err(io_err(&log_path))?;
        if improved {
            model.save(&best_dir, &CheckpointMeta { seed, epoch: entry.epoch })?;
        }
        Ok(())
    })?;
    outcome.model.save(&final_dir, &CheckpointMeta { seed, epoch: cfg.epochs })?;
    Ok(TrainSummary { log: outcome.log, best_epoch: outcome.best_epoch, best_dir, final_dir, log_path })
}

/// Parses a log written by [`train`].
pub fn read_log(path: &Path) -> Result<Vec<EpochLog>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(TrainError::Config(format!("{}: unexpected log header", path.display())));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| TrainError::Config(format!("bad log row {line:?}")))
            };
            if f.len() != 9 {
                return Err(TrainError::Config(format!("bad log row {line:?}")));
            }
            Ok(EpochLog {
                epoch: num(0)? as usize,
                l_time: num(1)?,
                l_ce: num(2)?,
                l_hr: num(3)?,
                beta: num(4)?,
                total: num(5)?,
                val_mae: if f[6].is_empty() { None } else { Some(num(6)?) },
                grad_norm: num(7)?,
                lr: num(8)?,
            })
        })
        .collect()
}
