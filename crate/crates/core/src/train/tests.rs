use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::losses::{beta_schedule, LossSchedule};
use crate::model::{ArchConfig, Model};
use crate::synth::{build_dataset, synthesize_clip, Preset, ScenarioSpec, SplitRatios, VideoClip};

fn tiny_arch() -> ArchConfig {
    ArchConfig { frames: 32, ..ArchConfig::micro() }
}

fn tiny_spec() -> ScenarioSpec {
    let mut s = ScenarioSpec::preset(Preset::Static).with_size(12, 12);
    s.frames = 32;
    s
}

fn tiny_clips(n: usize, seed: u64) -> Vec<VideoClip> {
    let spec = tiny_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| synthesize_clip(rng.random_range(60.0..100.0), &spec, seed + i as u64).unwrap()).collect()
}

/// Textbook Adam with L2-free coupled form, written independently.
fn adam_reference(w: &mut f64, m: &mut f64, v: &mut f64, g: f64, lr: f64, t: i32) {
    *m = 0.9 * *m + 0.1 * g;
    *v = 0.999 * *v + 0.001 * g * g;
    let mh = *m / (1.0 - 0.9f64.powi(t));
    let vh = *v / (1.0 - 0.999f64.powi(t));
    *w -= lr * mh / (vh.sqrt() + 1e-8);
}

#[test]
fn first_step_is_normalised_gradient() {
    for g in [0.5, -3.0, 1e-3] {
        let mut w = vec![1.0];
        let mut st = MomentState::zeros(1);
        let cfg = AdamWConfig { lr: 0.01, ..AdamWConfig::default() };
        adamw_step(&mut w, &[g], &mut st, &cfg, 1).unwrap();
        let expect = 1.0 - 0.01 * g / (g.abs() + 1e-8);
        assert!((w[0] - expect).abs() < 1e-15, "g {g}: {} vs {expect}", w[0]);
    }
}

#[test]
fn zero_decay_matches_plain_adam() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = AdamWConfig { lr: 0.05, weight_decay: 0.0, ..AdamWConfig::default() };
    let mut w = vec![0.3, -1.2, 2.0];
    let mut st = MomentState::zeros(3);
    let mut refs: Vec<(f64, f64, f64)> = w.iter().map(|&x| (x, 0.0, 0.0)).collect();
    for t in 1..=50 {
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        adamw_step(&mut w, &g, &mut st, &cfg, t).unwrap();
        for (r, &gi) in refs.iter_mut().zip(&g) {
            adam_reference(&mut r.0, &mut r.1, &mut r.2, gi, 0.05, t as i32);
        }
    }
    for (a, r) in w.iter().zip(&refs) {
        assert!((a - r.0).abs() < 1e-13);
    }
}

#[test]
fn weight_decay_is_decoupled() {
    // With zero gradient the moments stay zero and only the decay acts.
    let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.5, ..AdamWConfig::default() };
    let mut w = vec![2.0];
    let mut st = MomentState::zeros(1);
    adamw_step(&mut w, &[0.0], &mut st, &cfg, 1).unwrap();
    assert!((w[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    assert_eq!(st.m, vec![0.0]);
}

#[test]
fn adamw_minimises_a_quadratic() {
    let cfg = AdamWConfig { lr: 0.1, ..AdamWConfig::default() };
    let mut w = vec![0.0];
    let mut st = MomentState::zeros(1);
    let mut reached = None;
    for t in 1..=500 {
        let g = 2.0 * (w[0] - 3.0);
        adamw_step(&mut w, &[g], &mut st, &cfg, t).unwrap();
        if reached.is_none() && (w[0] - 3.0).abs() < 1e-3 {
            reached = Some(t);
        }
    }
    assert!(reached.is_some(), "w = {}", w[0]);
    assert!((w[0] - 3.0).abs() < 1e-3, "w = {}", w[0]);
}

#[test]
fn adamw_rejects_mismatched_state() {
    let cfg = AdamWConfig::default();
    let mut st = MomentState::zeros(2);
    assert!(adamw_step(&mut [0.0, 1.0], &[0.1], &mut st, &cfg, 1).is_err());
    assert!(adamw_step(&mut [0.0], &[0.1], &mut st, &cfg, 1).is_err());
    assert!(adamw_step(&mut [0.0, 1.0], &[0.1, 0.2], &mut st, &cfg, 0).is_err());
}

#[test]
fn gradient_clipping_caps_the_global_norm() {
    let mut g = vec![vec![3.0], vec![4.0]];
    assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
    assert!((g[0][0] - 0.6).abs() < 1e-15 && (g[1][0] - 0.8).abs() < 1e-15);
    let mut small = vec![vec![0.1, 0.2]];
    clip_grad_norm(&mut small, 1.0);
    assert_eq!(small, vec![vec![0.1, 0.2]]);
}

fn rows(pairs: &[(f64, f64)]) -> Vec<ClipRow> {
    pairs.iter().enumerate().map(|(id, &(gt_hr, pred_hr))| ClipRow { id, gt_hr, pred_hr }).collect()
}

#[test]
fn perfect_predictions_score_zero() {
    let m = compute_metrics(&rows(&[(60.0, 60.0), (75.0, 75.0), (90.0, 90.0)])).unwrap();
    assert_eq!((m.mae, m.rmse, m.mape), (0.0, 0.0, 0.0));
    assert!((m.rho.unwrap() - 1.0).abs() < 1e-12);
    let flat = compute_metrics(&rows(&[(70.0, 70.0), (70.0, 70.0)])).unwrap();
    assert_eq!(flat.rho, None);
}

#[test]
fn constant_offset_gives_exact_errors() {
    let m = compute_metrics(&rows(&[(60.0, 62.0), (80.0, 82.0), (100.0, 102.0), (71.0, 73.0)])).unwrap();
    assert!((m.mae - 2.0).abs() < 1e-12);
    assert!((m.rmse - 2.0).abs() < 1e-12);
    assert!((m.rho.unwrap() - 1.0).abs() < 1e-12);
    let mape = (2.0 / 60.0 + 2.0 / 80.0 + 2.0 / 100.0 + 2.0 / 71.0) / 4.0 * 100.0;
    assert!((m.mape - mape).abs() < 1e-12);
}

#[test]
fn metrics_flag_missing_correlation() {
    assert_eq!(compute_metrics(&rows(&[(60.0, 64.0)])).unwrap().rho, None);
    assert!(compute_metrics(&[]).is_err());
    assert!(compute_metrics(&rows(&[(0.0, 64.0)])).is_err());
    assert!(compute_metrics(&rows(&[(60.0, f64::NAN)])).is_err());
}

#[test]
fn metrics_match_a_spreadsheet_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let n = rng.random_range(2..40);
        let pairs: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random_range(45.0..150.0), rng.random_range(40.0..160.0))).collect();
        let m = compute_metrics(&rows(&pairs)).unwrap();
        // Column-wise accumulation as a spreadsheet would do it.
        let abs: Vec<f64> = pairs.iter().map(|(g, p)| (p - g).abs()).collect();
        let sq: Vec<f64> = pairs.iter().map(|(g, p)| (p - g).powi(2)).collect();
        let pct: Vec<f64> = pairs.iter().map(|(g, p)| 100.0 * (p - g).abs() / g).collect();
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (gb, pb) =
            (avg(&pairs.iter().map(|x| x.0).collect::<Vec<_>>()), avg(&pairs.iter().map(|x| x.1).collect::<Vec<_>>()));
        let sxy: f64 = pairs.iter().map(|(g, p)| (g - gb) * (p - pb)).sum();
        let sxx: f64 = pairs.iter().map(|(g, _)| (g - gb).powi(2)).sum();
        let syy: f64 = pairs.iter().map(|(_, p)| (p - pb).powi(2)).sum();
        assert!((m.mae - avg(&abs)).abs() < 1e-10);
        assert!((m.rmse - avg(&sq).sqrt()).abs() < 1e-10);
        assert!((m.mape - avg(&pct)).abs() < 1e-10);
        assert!((m.rho.unwrap() - sxy / (sxx * syy).sqrt()).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn mae_never_exceeds_rmse(pairs in prop::collection::vec((40.0f64..180.0, 30.0f64..200.0), 1..30)) {
        let m = compute_metrics(&rows(&pairs)).unwrap();
        prop_assert!(m.mae <= m.rmse + 1e-12);
    }
}

#[test]
fn evaluation_ignores_clip_order() {
    let model = Model::<f64>::new(tiny_arch(), 4).unwrap();
    let clips = tiny_clips(5, 40);
    let forward: Vec<(usize, &VideoClip)> = clips.iter().enumerate().collect();
    let mut backward = forward.clone();
    backward.reverse();
    backward.swap(0, 2);
    let post = PostConfig::default();
    let a = evaluate(&model, &forward, &post, "x").unwrap();
    let b = evaluate(&model, &backward, &post, "x").unwrap();
    assert_eq!(a, b);
    assert!(a.metrics.mae.is_finite());
}

#[test]
fn train_config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { lr: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { theta: -1.0, ..TrainConfig::default() },
        TrainConfig { grad_clip: -1.0, ..TrainConfig::default() },
        TrainConfig { min_lr: 1.0, ..TrainConfig::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn default_recipe_values() {
    let c = TrainConfig::default();
    assert_eq!((c.lr, c.weight_decay, c.batch_size, c.epochs), (9e-3, 0.0, 4, 30));
    assert_eq!((c.lambda, c.theta, c.alpha_time), (1.0, 1.5, 1.0));
    assert_eq!(c.grad_clip, 1.0);
    assert_eq!(c.lr_schedule, LrSchedule::Constant);
}

#[test]
fn cosine_schedule_spans_lr_to_min() {
    let c = TrainConfig { lr_schedule: LrSchedule::Cosine, min_lr: 1e-4, epochs: 11, ..TrainConfig::default() };
    assert_eq!(c.lr_at(1), c.lr);
    assert!((c.lr_at(11) - 1e-4).abs() < 1e-15);
    assert!((c.lr_at(6) - (1e-4 + c.lr) / 2.0).abs() < 1e-12);
    assert_eq!(TrainConfig::default().lr_at(17), 9e-3);
}

#[test]
fn logged_beta_follows_the_schedule() {
    let clips = tiny_clips(2, 1);
    let cfg = TrainConfig { epochs: 30, batch_size: 2, ..TrainConfig::default() };
    let out = train_model::<f32>(&cfg, &tiny_arch(), &clips, &[], |_, _, _| Ok(())).unwrap();
    assert_eq!(out.log.len(), 30);
    assert_eq!(out.log[0].beta, 1.0);
    for e in &out.log {
        let want = beta_schedule(&LossSchedule { epoch_current: e.epoch, ..LossSchedule::default() }).unwrap();
        assert_eq!(e.beta, want, "epoch {}", e.epoch);
    }
    assert!((out.log[29].beta - 1.5f64.powf(29.0 / 30.0)).abs() < 1e-12);
    assert!(out.log.windows(2).all(|w| w[1].beta >= w[0].beta));
}

#[test]
fn single_clip_overfits() {
    let clips = tiny_clips(1, 5);
    let arch = ArchConfig { dropout: 0.0, ..tiny_arch() };
    let cfg = TrainConfig { epochs: 50, batch_size: 1, ..TrainConfig::default() };
    let out = train_model::<f32>(&cfg, &arch, &clips, &[], |_, _, _| Ok(())).unwrap();
    let last = out.log.last().unwrap();
    assert!(last.l_time < 0.1, "final L_time {}", last.l_time);
}

#[test]
fn non_finite_inputs_abort_with_diagnostics() {
    let mut clips = tiny_clips(1, 2);
    let mut data = clips[0].clip.to_vec();
    data[0] = f32::NAN;
    clips[0].clip = crate::tensor::DiffTensor::new(data, clips[0].clip.dims().to_vec()).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 1, ..TrainConfig::default() };
    let err = train_model::<f32>(&cfg, &tiny_arch(), &clips, &[], |_, _, _| Ok(())).unwrap_err();
    assert!(matches!(err, TrainError::NonFinite { epoch: 1, batch: 1, .. }), "{err}");
}

fn disk_run(root: &std::path::Path, data: &std::path::Path, tag: &str) -> TrainSummary {
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        seed: 11,
        dataset: data.to_path_buf(),
        checkpoint_dir: root.join(tag),
        ..TrainConfig::default()
    };
    train(&cfg, &ArchConfig { dropout: 0.2, ..tiny_arch() }).unwrap()
}

#[test]
fn disk_training_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    build_dataset(&data, 6, &tiny_spec(), SplitRatios::new(4.0 / 6.0, 2.0 / 6.0, 0.0).unwrap(), 3).unwrap();
    let a = disk_run(tmp.path(), &data, "a");
    let b = disk_run(tmp.path(), &data, "b");
    for (x, y) in [(&a.final_dir, &b.final_dir), (&a.best_dir, &b.best_dir)] {
        for f in [crate::model::WEIGHTS_FILE, crate::model::MANIFEST_FILE] {
            assert_eq!(std::fs::read(x.join(f)).unwrap(), std::fs::read(y.join(f)).unwrap());
        }
    }
    assert_eq!(std::fs::read(&a.log_path).unwrap(), std::fs::read(&b.log_path).unwrap());
    let log = read_log(&a.log_path).unwrap();
    assert_eq!(log, a.log);
    assert_eq!(log.len(), 3);
    assert!(log.iter().all(|e| e.val_mae.is_some()));
    let best = log.iter().min_by(|p, q| p.val_mae.unwrap().total_cmp(&q.val_mae.unwrap())).unwrap();
    assert_eq!(a.best_epoch, best.epoch);

    let post = PostConfig::default();
    let r1 = evaluate_checkpoint(&a.final_dir, &data, crate::synth::Split::Val, &post).unwrap();
    let r2 = evaluate_checkpoint(&b.final_dir, &data, crate::synth::Split::Val, &post).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(checkpoint_precision(&a.final_dir).unwrap(), Precision::F32);
    let out = tmp.path().join("report");
    r1.write(&out).unwrap();
    let json: EvalReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json, r1);
    let csv = std::fs::read_to_string(out.join("clips.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + r1.rows.len());
}

#[test]
fn training_rejects_mismatched_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    build_dataset(&data, 2, &tiny_spec(), SplitRatios::new(1.0, 0.0, 0.0).unwrap(), 3).unwrap();
    let cfg =
        TrainConfig { epochs: 1, dataset: data, checkpoint_dir: tmp.path().join("run"), ..TrainConfig::default() };
    assert!(matches!(train(&cfg, &ArchConfig::micro()), Err(TrainError::Config(_))));
}

#[test]
fn stacking_checks_shapes() {
    let a = tiny_clips(1, 0).remove(0);
    let mut b = a.clone();
    b.clip = crate::tensor::DiffTensor::zeros([3, 32, 8, 8]).unwrap();
    assert!(stack_clips::<f32>(&[&a, &b]).is_err());
    let s = stack_clips::<f64>(&[&a, &a]).unwrap();
    assert_eq!(s.dims(), &[2, 3, 32, 12, 12]);
}
