use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{ArchConfig, Model, ModelError};
use crate::nn::{conv3d, temporal_shift, Mode};
use crate::tensor::{no_grad, DiffTensor};

/// Parameter budget for the default architecture.
pub const PARAM_BUDGET: usize = 1_500_000;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub iters: usize,
    pub secs_per_iter: f64,
    pub ops_per_sec: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Counted from the instantiated default model.
    pub param_count: usize,
    /// From the architecture's closed form.
    pub param_count_closed_form: usize,
    pub param_budget: usize,
    pub within_budget: bool,
}

fn time<F: FnMut() -> Result<(), ModelError>>(name: &str, iters: usize, mut f: F) -> Result<BenchRow, ModelError> {
    let start = Instant::now();
    for _ in 0..iters {
        f()?;
    }
    let secs = start.elapsed().as_secs_f64() / iters as f64;
    Ok(BenchRow { name: name.to_string(), iters, secs_per_iter: secs, ops_per_sec: 1.0 / secs.max(1e-12) })
}

fn random(rng: &mut ChaCha8Rng, dims: &[usize]) -> Result<DiffTensor<f32>, ModelError> {
    let n = dims.iter().product();
    Ok(DiffTensor::new((0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect(), dims.to_vec())?)
}

/// Throughput of the hot kernels and an inference pass of `arch`, plus the
/// parameter count of the default architecture.
pub fn run_bench(arch: &ArchConfig, iters: usize, seed: u64) -> Result<BenchReport, ModelError> {
    let iters = iters.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = arch.stage1_channels;
    let x = random(&mut rng, &[1, c, arch.frames, arch.height / 2, arch.width / 2])?;
    let w = random(&mut rng, &[c, c, 3, 3, 3])?;
    let clip = random(&mut rng, &[1, 3, arch.frames, arch.height, arch.width])?;
    let model = Model::<f32>::new(arch.clone(), seed)?;

    let rows = no_grad(|| -> Result<Vec<BenchRow>, ModelError> {
        Ok(vec![
            time("conv3d", iters, || Ok(conv3d(&x, &w, None, (1, 1, 1), (1, 1, 1)).map(drop)?))?,
            time("temporal_shift", iters, || Ok(temporal_shift(&x).map(drop)?))?,
            time("forward", iters, || model.forward(&clip, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0)).map(drop))?,
        ])
    })?;

    let default = ArchConfig::default();
    let param_count = Model::<f32>::new(default.clone(), seed)?.param_count();
    Ok(BenchReport {
        rows,
        param_count,
        param_count_closed_form: default.param_count(),
        param_budget: PARAM_BUDGET,
        within_budget: param_count < PARAM_BUDGET,
    })
}
