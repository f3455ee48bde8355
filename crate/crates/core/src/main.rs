use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulseforge::cli::{
    cmd_bench, cmd_eval, cmd_gradcheck, cmd_infer, cmd_synth, cmd_train, ArchPreset, CliError, RunConfig,
};
use pulseforge::synth::{Preset, Split};
use pulseforge::train::Precision;

#[derive(Parser)]
#[command(name = "pulseforge", version, about = "Synthetic-data rPPG training and evaluation")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed. Falls back to the config file, then PULSEFORGE_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the rayon pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Network preset.
    #[arg(long, global = true, value_parser = parse_from_str::<ArchPreset>)]
    arch: Option<ArchPreset>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic clip dataset.
    Synth(SynthArgs),
    /// Train on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Predict the pulse waveform and heart rate of one clip file.
    Infer(InferArgs),
    /// Finite-difference checks of every differentiable operation.
    Gradcheck,
    /// Kernel and forward-pass throughput plus the parameter count.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_clips: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<Preset>)]
    preset: Option<Preset>,
    /// Train, val and test fractions, comma separated.
    #[arg(long, value_parser = parse_split)]
    split: Option<[f64; 3]>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_parser = parse_from_str::<Split>)]
    split: Option<Split>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    clip: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    iters: Option<usize>,
}

fn parse_from_str<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected three comma-separated fractions, got {s:?}"))
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => Err(format!("unknown precision {s:?}, expected f32 or f64")),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(v) = cli.arch {
        cfg.arch.preset = v;
    }
    match &cli.command {
        Command::Synth(a) => {
            if let Some(v) = a.n_clips {
                cfg.data.n_clips = v;
            }
            if let Some(v) = a.preset {
                cfg.scenario.preset = v;
            }
            if let Some(v) = &a.split {
                cfg.data.split = *v;
            }
        }
        Command::Train(a) => {
            if let Some(v) = &a.data {
                cfg.data.dir = v.clone();
            }
            if let Some(v) = a.epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = a.batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(v) = a.lr {
                cfg.train.lr = v;
            }
            if let Some(v) = a.precision {
                cfg.train.precision = v;
            }
        }
        Command::Eval(a) => {
            if let Some(v) = &a.checkpoint {
                cfg.eval.checkpoint = v.clone();
            }
            if let Some(v) = &a.data {
                cfg.data.dir = v.clone();
            }
            if let Some(v) = a.split {
                cfg.eval.split = v;
            }
        }
        Command::Infer(a) => {
            if let Some(v) = &a.checkpoint {
                cfg.infer.checkpoint = v.clone();
            }
            if let Some(v) = &a.clip {
                cfg.infer.clip = v.clone();
            }
            if a.fps.is_some() {
                cfg.infer.fps = a.fps;
            }
        }
        Command::Gradcheck => {}
        Command::Bench(a) => {
            if let Some(v) = a.iters {
                cfg.bench.iters = v;
            }
        }
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Synth(_) => {
            let ds = cmd_synth(&cfg)?;
            println!("synth: {} clips in {}", ds.manifest.clips.len(), cfg.out.display());
        }
        Command::Train(_) => {
            let s = cmd_train(&cfg)?;
            let last = s.log.last().expect("at least one epoch");
            println!(
                "train: {} epochs, final total loss {:.6}, best epoch {} at {}",
                s.log.len(),
                last.total,
                s.best_epoch,
                s.best_dir.display()
            );
        }
        Command::Eval(_) => {
            let r = cmd_eval(&cfg)?;
            let m = &r.metrics;
            let rho = m.rho.map_or("n/a".to_string(), |r| format!("{r:.4}"));
            println!("eval: n={} mae={:.4} rmse={:.4} mape={:.4} rho={rho}", r.rows.len(), m.mae, m.rmse, m.mape);
        }
        Command::Infer(_) => {
            let o = cmd_infer(&cfg)?;
            println!("infer: hr_bpm={:.3} waveform={}", o.hr_bpm, o.waveform_path.display());
        }
        Command::Gradcheck => {
            let rows = cmd_gradcheck(&cfg)?;
            for r in &rows {
                println!(
                    "{:<20} {} checked={} skipped={} max_rel_err={:.3e}",
                    r.op,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.checked,
                    r.skipped,
                    r.max_rel_err
                );
            }
            let failed: Vec<_> = rows.iter().filter(|r| !r.pass).map(|r| r.op).collect();
            if !failed.is_empty() {
                return Err(CliError::Numeric(format!("gradient check failed for {}", failed.join(", "))));
            }
        }
        Command::Bench(_) => {
            let r = cmd_bench(&cfg)?;
            for row in &r.rows {
                println!("{:<16} {:>10.3} ops/s", row.name, row.ops_per_sec);
            }
            println!(
                "params: {} (closed form {}), budget {} {}",
                r.param_count,
                r.param_count_closed_form,
                r.param_budget,
                if r.within_budget { "ok" } else { "exceeded" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
