use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsp::BandConfig;
use crate::losses::{
    batch_loss, freq_ce, gaussian_pmf, hr_kl_psd, neg_pearson, HrGrid, LossContext, LossError, LossSchedule, PmfNorm,
    PsdBasis,
};
use crate::model::{ArchConfig, Model, ModelError};
use crate::nn::{
    attention_mask, batchnorm3d, conv3d, maxpool3d, temporal_shift, upsample_temporal, AttentionParams, Conv3dParams,
    Mode, RunningStats, BN_EPS, BN_MOMENTUM,
};
use crate::tensor::gradcheck::{check_gradients, check_gradients_sampled, GradReport};
use crate::tensor::{DiffTensor, ReduceKind, Result, TensorError};

/// Finite-difference step used by the suite.
pub const SUITE_H: f64 = 1e-5;
/// Largest accepted relative error.
pub const SUITE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub op: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub pass: bool,
}

fn rand_tensor(rng: &mut ChaCha8Rng, dims: &[usize], lo: f64, hi: f64) -> DiffTensor<f64> {
    let n = dims.iter().product();
    DiffTensor::new((0..n).map(|_| rng.random_range(lo..hi)).collect(), dims.to_vec()).expect("valid dims")
}

fn loss_err(e: LossError) -> TensorError {
    match e {
        LossError::Tensor(t) => t,
        other => TensorError::InvalidArgument { op: "loss", reason: other.to_string() },
    }
}

fn model_err(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => TensorError::InvalidArgument { op: "model", reason: other.to_string() },
    }
}

/// Scalarises an output with fixed random weights so every output element
/// contributes a distinct cotangent.
fn weighted(y: &DiffTensor<f64>, w: &DiffTensor<f64>) -> Result<DiffTensor<f64>> {
    y.mul(w)?.sum()
}

/// Central-difference checks of every differentiable layer and loss, plus
/// the full micro-configuration network, in 64-bit precision.
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut push = |op: &'static str, r: GradReport| {
        rows.push(SuiteRow {
            op,
            checked: r.checked,
            skipped: r.skipped,
            max_rel_err: r.max_rel_err,
            max_abs_err: r.max_abs_err,
            pass: r.passes(SUITE_TOL),
        })
    };

    let a = rand_tensor(&mut rng, &[3, 4], 0.5, 2.0);
    let b = rand_tensor(&mut rng, &[3, 4], 0.5, 2.0);
    push(
        "elementwise",
        check_gradients(&[a, b], SUITE_H, |v| {
            let s = v[0].mul(&v[1])?.div(&v[1].add_scalar(1.0)?)?;
            let t = s.sigmoid()?.add(&v[0].ln()?)?.add(&v[1].sqrt()?)?.sub(&v[0].exp()?.mul_scalar(0.1)?)?;
            t.square()?.mean()
        })?,
    );

    let a = rand_tensor(&mut rng, &[3, 5], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[5, 2], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[3, 2], -1.0, 1.0);
    push("matmul", check_gradients(&[a, b], SUITE_H, |v| weighted(&v[0].matmul(&v[1])?, &w))?);

    let a = rand_tensor(&mut rng, &[4, 6], -2.0, 2.0);
    let w = rand_tensor(&mut rng, &[4, 6], -1.0, 1.0);
    push(
        "reductions",
        check_gradients(&[a], SUITE_H, |v| {
            let s = v[0].softmax(1)?;
            let m = v[0].reduce(ReduceKind::Max, &[1], true)?;
            let l1 = v[0].reduce(ReduceKind::L1Norm, &[0], true)?;
            weighted(&s.add(&m)?.add(&l1)?.add(&v[0].mean_axes(&[0], true)?)?, &w)
        })?,
    );

    let x = rand_tensor(&mut rng, &[2, 2, 5, 5, 5], -1.0, 1.0);
    let k = rand_tensor(&mut rng, &[3, 2, 3, 3, 3], -0.5, 0.5);
    let bias = rand_tensor(&mut rng, &[3], -0.5, 0.5);
    let w1 = rand_tensor(&mut rng, &[2, 3, 5, 5, 5], -1.0, 1.0);
    let w2 = rand_tensor(&mut rng, &[2, 3, 2, 5, 2], -1.0, 1.0);
    push(
        "conv3d",
        check_gradients(&[x.clone(), k.clone(), bias.clone()], SUITE_H, |v| {
            weighted(&conv3d(&v[0], &v[1], Some(&v[2]), (1, 1, 1), (1, 1, 1))?, &w1)
        })?,
    );
    push(
        "conv3d_strided",
        check_gradients(&[x, k, bias], SUITE_H, |v| {
            weighted(&conv3d(&v[0], &v[1], Some(&v[2]), (2, 1, 2), (0, 1, 0))?, &w2)
        })?,
    );

    let x = rand_tensor(&mut rng, &[3, 2, 4, 3, 3], -1.0, 1.0);
    let g = rand_tensor(&mut rng, &[2], 0.5, 1.5);
    let be = rand_tensor(&mut rng, &[2], -0.5, 0.5);
    let w = rand_tensor(&mut rng, &[3, 2, 4, 3, 3], -1.0, 1.0);
    push(
        "batchnorm3d",
        check_gradients(&[x, g, be], SUITE_H, |v| {
            let running = std::sync::Mutex::new(RunningStats { mean: vec![0.0; 2], var: vec![1.0; 2] });
            weighted(&batchnorm3d(&v[0], &v[1], &v[2], &running, Mode::Train, BN_EPS, BN_MOMENTUM)?, &w)
        })?,
    );

    let x = rand_tensor(&mut rng, &[1, 2, 4, 6, 6], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[1, 2, 2, 3, 3], -1.0, 1.0);
    push("maxpool3d", check_gradients(&[x], SUITE_H, |v| weighted(&maxpool3d(&v[0], (2, 2, 2))?, &w))?);

    let x = rand_tensor(&mut rng, &[2, 6, 5, 2, 2], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[2, 6, 5, 2, 2], -1.0, 1.0);
    push("temporal_shift", check_gradients(&[x], SUITE_H, |v| weighted(&temporal_shift(&v[0])?, &w))?);

    let x = rand_tensor(&mut rng, &[1, 2, 3, 2, 2], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[1, 2, 6, 2, 2], -1.0, 1.0);
    push("upsample_temporal", check_gradients(&[x], SUITE_H, |v| weighted(&upsample_temporal(&v[0], 2)?, &w))?);

    let x = rand_tensor(&mut rng, &[1, 3, 4, 3, 3], -1.0, 1.0);
    let att = AttentionParams::<f64>::init(3, &mut rng)?;
    let conv = Conv3dParams::<f64>::init(3, 3, (1, 3, 3), (0, 1, 1), &mut rng)?;
    let w = rand_tensor(&mut rng, &[1, 3, 4, 3, 3], -1.0, 1.0);
    push(
        "attention_mask",
        check_gradients(
            &[x, att.weight.clone(), att.bias.clone(), conv.weight.clone(), conv.bias.clone()],
            SUITE_H,
            |v| {
                let a = AttentionParams { weight: v[1].clone(), bias: v[2].clone() };
                let c = Conv3dParams::from_tensors(v[3].clone(), v[4].clone(), (1, 1, 1), (0, 1, 1))?;
                weighted(&attention_mask(&v[0], &a, &c)?, &w)
            },
        )?,
    );

    let len = 64;
    let pred = rand_tensor(&mut rng, &[len], -1.0, 1.0);
    let gt = DiffTensor::from_f64(&(0..len).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>(), [len])?;
    push(
        "neg_pearson",
        check_gradients(std::slice::from_ref(&pred), SUITE_H, |v| neg_pearson(&v[0], &gt).map_err(loss_err))?,
    );

    let grid = HrGrid::default();
    let basis = PsdBasis::<f64>::new(len, 30.0, BandConfig::HEART_RATE, grid, PmfNorm::Sum).map_err(loss_err)?;
    let wk = rand_tensor(&mut rng, &[grid.len()], -1.0, 1.0);
    push(
        "psd_pmf",
        check_gradients(std::slice::from_ref(&pred), SUITE_H, |v| weighted(&basis.pmf(&v[0]).map_err(loss_err)?, &wk))?,
    );
    let gt_pmf = gaussian_pmf(80.0, 3.0, grid).map_err(loss_err)?.pmf;
    push(
        "freq_ce",
        check_gradients(std::slice::from_ref(&pred), SUITE_H, |v| {
            freq_ce(&basis.pmf(&v[0]).map_err(loss_err)?, &gt_pmf).map_err(loss_err)
        })?,
    );
    push(
        "hr_kl",
        check_gradients(std::slice::from_ref(&pred), SUITE_H, |v| {
            hr_kl_psd(80.0, &basis.pmf(&v[0]).map_err(loss_err)?, 3.0, grid).map_err(loss_err)
        })?,
    );

    let batch = rand_tensor(&mut rng, &[2, len], -1.0, 1.0);
    let waves =
        [gt.clone(), DiffTensor::from_f64(&(0..len).map(|i| (i as f64 * 0.29).cos()).collect::<Vec<_>>(), [len])?];
    let ctx = LossContext { basis: basis.clone(), sigma: 3.0 };
    let schedule = LossSchedule { lambda: 1.0, theta: 1.5, epoch_current: 3, epoch_total: 10, alpha_time: 1.0 };
    push(
        "overall_loss",
        check_gradients(&[batch], SUITE_H, |v| {
            Ok(batch_loss(&v[0], &waves, &[80.0, 70.0], &schedule, &ctx).map_err(loss_err)?.total)
        })?,
    );

    let arch = ArchConfig::micro();
    let model = Model::<f64>::new(arch.clone(), seed).map_err(model_err)?;
    let clip = rand_tensor(&mut rng, &[1, 3, arch.frames, arch.height, arch.width], 0.0, 1.0);
    let inputs: Vec<DiffTensor<f64>> = model.parameters().into_iter().map(|(_, p)| p.detach()).collect();
    let w = rand_tensor(&mut rng, &[1, arch.frames], -1.0, 1.0);
    push(
        "model_micro",
        check_gradients_sampled(&inputs, SUITE_H, 6, seed, |v| {
            let mut m = model.clone();
            for ((_, slot), t) in m.parameters_mut().into_iter().zip(v) {
                *slot = t.clone();
            }
            let mut r = ChaCha8Rng::seed_from_u64(0);
            weighted(&m.forward(&clip, Mode::Train, &mut r).map_err(model_err)?, &w)
        })?,
    );
    Ok(rows)
}
