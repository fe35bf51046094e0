//! `ethqbm` command-line runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ethqbm::harness::{run_experiment, seed_instances, ExperimentConfig, ExperimentKind, RunRecord};
use ethqbm::train::{resume, train, Backend, ModelKind, RunConfig, TrainConfig, TrainRun};

#[derive(Parser)]
#[command(name = "ethqbm", version, about = "Quench-trained quantum Boltzmann machine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level-spacing statistics against the transverse-field ratio.
    LevelStats(ExperimentArgs),
    /// Quench gradient-observable error against system size.
    QuenchAccuracyVsSize(ExperimentArgs),
    /// Quench gradient-observable error against quench time.
    QuenchAccuracyVsTime(ExperimentArgs),
    /// Minimum KL divergence of trained models.
    TrainKl(ExperimentArgs),
    /// Minimum AIC of trained models.
    TrainAic(ExperimentArgs),
    /// (KL_quench - KL_exact) / (KL_rbm - KL_exact) per system size.
    KlRatio(ExperimentArgs),
    /// Noisy quench training against coherence time.
    NoiseSweep(ExperimentArgs),
    /// Train a single model on a seeded Bernoulli mixture.
    Train(TrainArgs),
    /// Continue an interrupted `train` run from its output directory.
    Resume {
        /// Run directory written by `train --out`.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; absent fields take the defaults of the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// exact-gibbs, quench or quench+noise.
    #[arg(long)]
    backend: Option<Backend>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON document with `train` and `data` sections. Overrides the other model flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (checkpoints, metrics.csv, best parameters).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "quench")]
    backend: Backend,
    /// A QBM family name or `rbm`.
    #[arg(long, default_value = "restricted-transverse-ising")]
    model: ModelKind,
    /// Number of visible units.
    #[arg(long, default_value_t = 4)]
    nv: usize,
    #[arg(long)]
    epochs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    let kind = match command {
        Command::LevelStats(a) => (ExperimentKind::LevelStats, a),
        Command::QuenchAccuracyVsSize(a) => (ExperimentKind::QuenchAccuracyVsSize, a),
        Command::QuenchAccuracyVsTime(a) => (ExperimentKind::QuenchAccuracyVsTime, a),
        Command::TrainKl(a) => (ExperimentKind::TrainKl, a),
        Command::TrainAic(a) => (ExperimentKind::TrainAic, a),
        Command::KlRatio(a) => (ExperimentKind::KlRatio, a),
        Command::NoiseSweep(a) => (ExperimentKind::NoiseSweep, a),
        Command::Train(a) => return run_train(a),
        Command::Resume { dir } => {
            let run = resume(&dir)?;
            report_train(&run);
            return Ok(ExitCode::SUCCESS);
        }
    };
    let config = experiment_config(kind.0, kind.1)?;
    let record = run_experiment(&config)?;
    report_experiment(&record, config.out_dir.as_deref());
    Ok(if record.failures() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn experiment_config(kind: ExperimentKind, args: ExperimentArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json_for(kind, &text)?
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(backend) = args.backend {
        config.backend = backend;
    }
    if args.out.is_some() {
        config.out_dir = args.out;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    config.validate()?;
    Ok(config)
}

fn run_train(args: TrainArgs) -> Result<ExitCode> {
    let run = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<RunConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let mut spec = ExperimentConfig::new(ExperimentKind::TrainKl);
            spec.n_visible = vec![args.nv];
            spec.instances = 1;
            spec.seed = args.seed;
            spec.validate()?;
            let instance = seed_instances(&spec)?.remove(0);
            let mut train = TrainConfig::reference(args.model, args.backend, args.nv, instance.train_seed);
            if let Some(epochs) = args.epochs {
                train.epochs = epochs;
            }
            RunConfig { train, data: instance.data }
        }
    };
    if matches!(args.threads, Some(0)) {
        bail!("--threads must be positive");
    }
    let result = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| train(run, args.out.as_deref()))?,
        None => train(run, args.out.as_deref())?,
    };
    report_train(&result);
    Ok(ExitCode::SUCCESS)
}

fn report_train(run: &TrainRun) {
    let initial = run.metrics.first().map_or(f64::NAN, |m| m.kl);
    let label = match run.config.train.model {
        ModelKind::Rbm => "rbm".to_string(),
        model => format!("{model} / {}", run.config.train.backend.name()),
    };
    println!(
        "{label}: KL {:.5} -> min {:.5} (epoch {}), min AIC {:.3}, final KL {:.5}",
        initial,
        run.min_kl,
        run.best_epoch,
        run.min_aic,
        run.final_report.kl,
    );
}

fn report_experiment(record: &RunRecord, out: Option<&Path>) {
    let metric = record.kind.primary_metric();
    println!("{} (config {})", record.kind, &record.config_hash[..12]);
    println!("{:<32} {:>8} {:>12} {:>12} {:>4}", "series", "x", metric, "se", "n");
    for a in record.aggregates.iter().filter(|a| a.metric == metric) {
        println!("{:<32} {:>8} {:>12.5} {:>12.5} {:>4}", a.series, a.x, a.mean, a.se, a.count);
    }
    if record.failures() > 0 {
        eprintln!("{} instance rows failed; see metrics.csv", record.failures());
    }
    if let Some(dir) = out {
        println!("wrote {}", dir.display());
    }
}
