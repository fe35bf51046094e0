//! Per-instance jobs of each experiment kind.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{median, with_mean_field, ExperimentConfig, ExperimentKind, Instance, MetricRow, TraceRow};
use crate::noise::NoiseConfig;
use crate::spectral::{eig_hermitian, fit_berry_robnik, level_spacings_from_values, BerryRobnikFit, SpacingSample};
use crate::spin_ops::{HamiltonianTerms, InitConfig};
use crate::thermal::{quench_sample, GibbsEnsemble, ObservableSet, QuenchSystem, TimeWindow};
use crate::train::{quench_observables, train, Backend, ModelKind, RunConfig, TrainConfig};
use crate::{Error, Result};

/// A spacing histogram to export next to the results.
#[derive(Clone, Debug)]
pub struct SpacingExport {
    pub file: String,
    pub sample: SpacingSample,
    pub fit: BerryRobnikFit,
}

#[derive(Default)]
pub struct JobOutput {
    pub rows: Vec<MetricRow>,
    pub traces: Vec<TraceRow>,
    /// `(file name, JSON text)` of best parameters.
    pub snapshots: Vec<(String, String)>,
    pub spacing: Vec<SpacingExport>,
}

impl JobOutput {
    fn extend(&mut self, other: JobOutput) {
        self.rows.extend(other.rows);
        self.traces.extend(other.traces);
        self.snapshots.extend(other.snapshots);
        self.spacing.extend(other.spacing);
    }
}

/// One trained series of a training sweep.
#[derive(Clone, Debug)]
struct TrainSeries {
    name: String,
    model: ModelKind,
    backend: Backend,
    noise: NoiseConfig,
    /// Sweep coordinate; `None` means the `n_v` of the instance.
    x: Option<f64>,
}

enum Job<'a> {
    Level { inst: &'a Instance, ratio: f64 },
    AccuracySize { inst: &'a Instance },
    AccuracyTime { inst: &'a Instance },
    Train { inst: &'a Instance, series: TrainSeries },
}

/// Names of the quench, exact and RBM series compared by the KL ratio.
pub fn ratio_series(config: &ExperimentConfig) -> (String, String, String) {
    (format!("qbm-{}", config.backend), format!("qbm-{}", Backend::ExactGibbs), "rbm".into())
}

fn training_series(config: &ExperimentConfig) -> Vec<TrainSeries> {
    let qbm = ModelKind::Qbm(config.family);
    let series = |name: String, model, backend, noise, x| TrainSeries { name, model, backend, noise, x };
    let mut out = Vec::new();
    if config.kind == ExperimentKind::NoiseSweep {
        for &t in &config.coherence_times {
            let noise = NoiseConfig::with_coherence_time(t).with_shots(config.noise.shots);
            out.push(series(format!("qbm-{}", Backend::QuenchNoisy), qbm, Backend::QuenchNoisy, noise, Some(t)));
        }
        if config.baselines {
            let inf = Some(f64::INFINITY);
            out.push(series(format!("qbm-{}", Backend::Quench), qbm, Backend::Quench, config.noise, inf));
            out.push(series(format!("qbm-{}", Backend::ExactGibbs), qbm, Backend::ExactGibbs, config.noise, inf));
            out.push(series("rbm".into(), ModelKind::Rbm, Backend::ExactGibbs, config.noise, inf));
        }
        return out;
    }
    out.push(series(format!("qbm-{}", config.backend), qbm, config.backend, config.noise, None));
    if config.baselines {
        if config.backend != Backend::ExactGibbs {
            out.push(series(format!("qbm-{}", Backend::ExactGibbs), qbm, Backend::ExactGibbs, config.noise, None));
        }
        out.push(series("rbm".into(), ModelKind::Rbm, Backend::ExactGibbs, config.noise, None));
    }
    out
}

/// Execute every job of `config` on the current rayon pool, in a fixed order.
pub fn run_jobs(config: &ExperimentConfig, instances: &[Instance]) -> Result<JobOutput> {
    if config.kind == ExperimentKind::KlRatio && !config.baselines {
        return Err(Error::InvalidArgument("kl-ratio needs the baseline series".into()));
    }
    let mut jobs = Vec::new();
    for inst in instances {
        match config.kind {
            ExperimentKind::LevelStats => {
                jobs.extend(config.gamma_ratios.iter().map(|&ratio| Job::Level { inst, ratio }));
            }
            ExperimentKind::QuenchAccuracyVsSize => jobs.push(Job::AccuracySize { inst }),
            ExperimentKind::QuenchAccuracyVsTime => jobs.push(Job::AccuracyTime { inst }),
            _ => {
                for series in training_series(config) {
                    jobs.push(Job::Train { inst, series });
                }
            }
        }
    }
    let outputs: Vec<JobOutput> = jobs.par_iter().map(|job| run_job(config, job)).collect();
    let mut all = JobOutput::default();
    for out in outputs {
        all.extend(out);
    }
    if config.kind == ExperimentKind::NoiseSweep {
        replicate_baselines(config, &mut all.rows);
    }
    Ok(all)
}

/// Reference series of the noise sweep are drawn as flat lines: their rows
/// are repeated at every coherence time.
fn replicate_baselines(config: &ExperimentConfig, rows: &mut Vec<MetricRow>) {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows.drain(..) {
        if row.x.is_infinite() {
            for &t in &config.coherence_times {
                out.push(MetricRow { x: t, ..row.clone() });
            }
        } else {
            out.push(row);
        }
    }
    *rows = out;
}

fn run_job(config: &ExperimentConfig, job: &Job) -> JobOutput {
    let (inst, series, x, seed) = match job {
        Job::Level { inst, ratio } => (*inst, format!("nv{}", inst.n_visible), *ratio, inst.quench_seed),
        Job::AccuracySize { inst } => (*inst, config.family.to_string(), inst.n_visible as f64, inst.quench_seed),
        Job::AccuracyTime { inst } => (*inst, format!("{}/nv{}", config.family, inst.n_visible), f64::NAN, inst.quench_seed),
        Job::Train { inst, series } => (
            *inst,
            series_name(config, series, inst),
            series.x.unwrap_or(inst.n_visible as f64),
            inst.train_seed,
        ),
    };
    let result = match job {
        Job::Level { inst, ratio } => level_job(inst, *ratio, config.spectrum_fraction, &series),
        Job::AccuracySize { inst } => accuracy_job(config, inst, &series, None),
        Job::AccuracyTime { inst } => accuracy_job(config, inst, &series, Some(&config.times)),
        Job::Train { inst, series: s } => train_job(config, inst, s, &series, x),
    };
    match result {
        Ok(out) => out,
        Err(e) => {
            log::warn!("{} {series} x={x} instance {}: {e}", config.kind, inst.index);
            let xs: Vec<f64> = match job {
                Job::AccuracyTime { .. } => config.times.clone(),
                _ => vec![x],
            };
            let rows = xs
                .into_iter()
                .map(|x| MetricRow {
                    series: series.clone(),
                    x,
                    instance: inst.index,
                    seed,
                    metric: config.kind.primary_metric().into(),
                    label: String::new(),
                    value: f64::NAN,
                    status: format!("error: {e}"),
                })
                .collect();
            JobOutput { rows, ..JobOutput::default() }
        }
    }
}

fn series_name(config: &ExperimentConfig, series: &TrainSeries, inst: &Instance) -> String {
    if config.kind == ExperimentKind::NoiseSweep {
        format!("{}/nv{}", series.name, inst.n_visible)
    } else {
        series.name.clone()
    }
}

fn row(series: &str, x: f64, inst: &Instance, seed: u64, metric: &str, value: f64) -> MetricRow {
    MetricRow {
        series: series.into(),
        x,
        instance: inst.index,
        seed,
        metric: metric.into(),
        label: String::new(),
        value,
        status: "ok".into(),
    }
}

/// Berry–Robnik fit of the central `fraction` of the full spectrum.
fn level_job(inst: &Instance, ratio: f64, fraction: f64, series: &str) -> Result<JobOutput> {
    let base = InitConfig::default().gamma_mean;
    let gamma_mean = ratio * inst.model.params.interaction_rms();
    let model = with_mean_field(&inst.model, gamma_mean, base);
    let h = HamiltonianTerms::from_model(&model)?.total().to_dense();
    let eigsys = eig_hermitian(&h)?;
    let levels = eigsys.eigenvalues();
    let cut = ((1.0 - fraction) / 2.0 * levels.len() as f64).floor() as usize;
    let sample = level_spacings_from_values(&levels[cut..levels.len() - cut])?;
    let fit = fit_berry_robnik(&sample)?;
    let seed = inst.quench_seed;
    let mut out = JobOutput::default();
    out.rows.push(row(series, ratio, inst, seed, "rho", fit.rho));
    out.rows.push(row(series, ratio, inst, seed, "ks_statistic", fit.ks_statistic));
    out.rows.push(row(series, ratio, inst, seed, "gamma_mean", gamma_mean));
    if inst.index == 0 && ratio == 1.0 {
        out.spacing.push(SpacingExport { file: format!("nv{}_ratio1.csv", inst.n_visible), sample, fit });
    }
    Ok(out)
}

/// Gradient observables of the QBM block, without `H_QBM` itself.
fn gradient_observables(system: &QuenchSystem, inst: &Instance) -> Result<ObservableSet> {
    let full = quench_observables(&inst.model)?;
    let mut set = ObservableSet::new();
    let keep = full.len() - 1;
    for (name, op) in full.names().iter().zip(full.ops()).take(keep) {
        set.push(name.clone(), op.clone());
    }
    debug_assert_eq!(set.len(), inst.model.trainable_count());
    debug_assert_eq!(system.layout().n(), inst.model.layout.n());
    Ok(set)
}

/// Normalized errors `|quench − Gibbs(H, β_full)|/2` of the gradient
/// observables, averaged over `config.quench_times` random times or, with
/// `times`, at each single time.
fn accuracy_job(
    config: &ExperimentConfig,
    inst: &Instance,
    series: &str,
    times: Option<&[f64]>,
) -> Result<JobOutput> {
    let system = QuenchSystem::new(&inst.model)?;
    let set = gradient_observables(&system, inst)?;
    let beta_full = system.beta_full()?;
    let ensemble = GibbsEnsemble::new(system.eigsys(), beta_full)?;
    let thermal: Vec<f64> = set.ops().iter().map(|op| ensemble.expectation(op)).collect::<Result<_>>()?;
    let noise = config.diagnostic_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(inst.quench_seed);
    let points: Vec<(f64, Vec<f64>)> = match times {
        None => {
            let drawn = TimeWindow::default().sample_n(config.quench_times, &mut rng);
            vec![(inst.n_visible as f64, drawn)]
        }
        Some(ts) => ts.iter().map(|&t| (t, vec![t])).collect(),
    };
    let seed = inst.quench_seed;
    let mut out = JobOutput::default();
    for (x, ts) in points {
        let est = quench_sample(&system, &set, &ts, Some(&noise), &mut rng)?;
        let errors: Vec<f64> = est.values.iter().zip(&thermal).map(|(q, g)| (q - g).abs() / 2.0).collect();
        out.rows.push(row(series, x, inst, seed, "median_error", median(&errors)));
        if let Some(reading) = est.thermometer {
            let err = (reading.beta - beta_full).abs() / beta_full.abs();
            out.rows.push(row(series, x, inst, seed, "beta_error", err));
        }
        for (name, err) in set.names().iter().zip(&errors) {
            let mut r = row(series, x, inst, seed, "observable_error", *err);
            r.label = name.clone();
            out.rows.push(r);
        }
    }
    Ok(out)
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn train_job(
    config: &ExperimentConfig,
    inst: &Instance,
    series: &TrainSeries,
    name: &str,
    x: f64,
) -> Result<JobOutput> {
    let mut cfg = TrainConfig::reference(series.model, series.backend, inst.n_visible, inst.train_seed);
    cfg.n_hidden = config.n_hidden;
    cfg.n_thermometer = config.n_thermometer;
    cfg.noise = series.noise;
    let o = &config.train;
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.points_per_epoch {
        cfg.points_per_epoch = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = o.eval_times {
        cfg.eval_times = v;
    }
    if let Some(v) = o.final_samples {
        cfg.final_samples = v;
    }
    if let Some(v) = o.beta_correction {
        cfg.beta_correction = v;
    }
    let run = train(RunConfig { train: cfg, data: inst.data.clone() }, None)?;
    let seed = inst.train_seed;
    let mut out = JobOutput::default();
    out.rows.push(row(name, x, inst, seed, "min_kl", run.min_kl));
    out.rows.push(row(name, x, inst, seed, "min_aic", run.min_aic));
    out.rows.push(row(name, x, inst, seed, "final_kl", run.final_report.kl));
    out.rows.push(row(name, x, inst, seed, "final_aic", run.final_report.aic));
    out.rows.push(row(name, x, inst, seed, "best_epoch", run.best_epoch as f64));
    for m in &run.metrics {
        out.traces.push(TraceRow {
            series: name.into(),
            x,
            instance: inst.index,
            epoch: m.epoch,
            kl: m.kl,
            beta_therm: m.beta_therm,
        });
    }
    let file = if series.x.is_some() && x.is_finite() {
        format!("{}_nv{}_x{}_i{}.json", file_stem(name), inst.n_visible, x, inst.index)
    } else {
        format!("{}_nv{}_i{}.json", file_stem(name), inst.n_visible, inst.index)
    };
    out.snapshots.push((file, serde_json::to_string_pretty(&run.best)? + "\n"));
    Ok(out)
}
