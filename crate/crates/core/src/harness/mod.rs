//! Experiment sweeps over seeded instances, aggregation and result files.

mod experiments;


use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::BernoulliMixture;
use crate::noise::NoiseConfig;
use crate::spin_ops::{init_parameters, Family, InitConfig, ModelSpec, QbmModel, SystemLayout};
use crate::train::Backend;
use crate::{Error, Result};

pub use experiments::run_jobs;

/// Largest visible count accepted for training sweeps.
pub const MAX_TRAIN_VISIBLE: usize = 8;
/// Largest visible count accepted for thermalization diagnostics.
pub const MAX_DIAGNOSTIC_VISIBLE: usize = 9;

/// The sweep an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Berry–Robnik ρ against the normalized transverse field.
    LevelStats,
    /// Quench error of gradient observables against system size.
    QuenchAccuracyVsSize,
    /// Quench error of gradient observables against evolution time.
    QuenchAccuracyVsTime,
    /// Minimum KL against n_v.
    TrainKl,
    /// Minimum AIC against n_v.
    TrainAic,
    /// `(KL_quench − KL_exact)/(KL_rbm − KL_exact)` against n_v.
    KlRatio,
    /// Minimum KL against the coherence time.
    NoiseSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::LevelStats,
        ExperimentKind::QuenchAccuracyVsSize,
        ExperimentKind::QuenchAccuracyVsTime,
        ExperimentKind::TrainKl,
        ExperimentKind::TrainAic,
        ExperimentKind::KlRatio,
        ExperimentKind::NoiseSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::LevelStats => "level-stats",
            ExperimentKind::QuenchAccuracyVsSize => "quench-accuracy-vs-size",
            ExperimentKind::QuenchAccuracyVsTime => "quench-accuracy-vs-time",
            ExperimentKind::TrainKl => "train-kl",
            ExperimentKind::TrainAic => "train-aic",
            ExperimentKind::KlRatio => "kl-ratio",
            ExperimentKind::NoiseSweep => "noise-sweep",
        }
    }

    pub fn is_training(&self) -> bool {
        matches!(
            self,
            ExperimentKind::TrainKl | ExperimentKind::TrainAic | ExperimentKind::KlRatio | ExperimentKind::NoiseSweep
        )
    }

    /// Metric written to `plotdata.csv`.
    pub fn primary_metric(&self) -> &'static str {
        match self {
            ExperimentKind::LevelStats => "rho",
            ExperimentKind::QuenchAccuracyVsSize | ExperimentKind::QuenchAccuracyVsTime => "median_error",
            ExperimentKind::TrainKl | ExperimentKind::NoiseSweep => "min_kl",
            ExperimentKind::TrainAic => "min_aic",
            ExperimentKind::KlRatio => "kl_ratio",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment kind {s:?}")))
    }
}

/// Optional overrides of the reference training protocol.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_times: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_correction: Option<bool>,
}

/// A complete experiment description. Fields missing from a config file
/// take the defaults of its `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub family: Family,
    pub n_visible: Vec<usize>,
    pub n_hidden: usize,
    pub n_thermometer: usize,
    pub instances: usize,
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    /// Backend of the QBM series in training sweeps; `quench+noise` also
    /// switches on the channels in the diagnostics.
    pub backend: Backend,
    /// Add the exact-QBM and RBM reference series to training sweeps.
    pub baselines: bool,
    pub noise: NoiseConfig,
    pub mixture_modes: usize,
    pub mixture_fidelity: f64,
    /// `Γ̄ / √(w²_int)` values (level-stats).
    pub gamma_ratios: Vec<f64>,
    /// Central share of the spectrum whose spacings are fitted (level-stats).
    pub spectrum_fraction: f64,
    /// Single quench times (quench-accuracy-vs-time).
    pub times: Vec<f64>,
    /// Quench times averaged per estimate (quench-accuracy-vs-size).
    pub quench_times: usize,
    /// `T1 = T_φ` values (noise-sweep).
    pub coherence_times: Vec<f64>,
    pub train: TrainOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults for `kind`: restricted transverse Ising, one hidden unit, two
    /// thermometer units, five instances.
    pub fn new(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let n_visible = match kind {
            LevelStats | QuenchAccuracyVsTime | NoiseSweep => vec![6],
            QuenchAccuracyVsSize => (2..=6).collect(),
            TrainKl | TrainAic | KlRatio => (2..=8).collect(),
        };
        Self {
            kind,
            family: Family::RestrictedTransverseIsing,
            n_visible,
            n_hidden: 1,
            n_thermometer: 2,
            instances: 5,
            seed: 0,
            backend: if kind == NoiseSweep { Backend::QuenchNoisy } else { Backend::Quench },
            baselines: true,
            noise: NoiseConfig::reference(),
            mixture_modes: 8,
            mixture_fidelity: 0.9,
            gamma_ratios: vec![0.01, 0.03, 0.1, 0.3, 0.5, 1.0, 2.0, 3.0],
            spectrum_fraction: 0.5,
            times: vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4],
            quench_times: 2,
            coherence_times: vec![5.0, 10.0, 25.0, 75.0, 200.0],
            train: TrainOverrides::default(),
            out_dir: None,
            threads: None,
        }
    }

    /// Parse a JSON document, filling absent fields from the defaults of
    /// its `kind`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let kind: ExperimentKind = match value.get("kind") {
            Some(k) => serde_json::from_value(k.clone())?,
            None => return Err(Error::InvalidArgument("config has no \"kind\"".into())),
        };
        Self::merge_over_defaults(kind, value)
    }

    /// Like [`from_json`](Self::from_json) with `kind` supplied by the caller
    /// (a `kind` in the document must agree).
    pub fn from_json_for(kind: ExperimentKind, text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(k) = value.get("kind") {
            let declared: ExperimentKind = serde_json::from_value(k.clone())?;
            if declared != kind {
                return Err(Error::InvalidArgument(format!("config is for {declared}, not {kind}")));
            }
        }
        Self::merge_over_defaults(kind, value)
    }

    fn merge_over_defaults(kind: ExperimentKind, value: serde_json::Value) -> Result<Self> {
        let serde_json::Value::Object(overrides) = value else {
            return Err(Error::InvalidArgument("config must be a JSON object".into()));
        };
        let serde_json::Value::Object(mut merged) = serde_json::to_value(Self::new(kind))? else {
            unreachable!("configs serialize to objects");
        };
        for (k, v) in overrides {
            merged.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(serde_json::Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.instances == 0 {
            return bad("at least one instance is required".into());
        }
        if self.n_visible.is_empty() || self.n_visible.contains(&0) {
            return bad("n_visible must list positive sizes".into());
        }
        let cap = if self.kind.is_training() { MAX_TRAIN_VISIBLE } else { MAX_DIAGNOSTIC_VISIBLE };
        if let Some(n) = self.n_visible.iter().find(|n| **n > cap) {
            return bad(format!("n_visible = {n} exceeds the cap of {cap} for {}", self.kind));
        }
        if !self.kind.is_training() && self.n_thermometer == 0 {
            return bad("thermalization diagnostics need thermometer qubits".into());
        }
        if self.mixture_modes == 0 || !(0.0..=1.0).contains(&self.mixture_fidelity) {
            return bad("mixture needs at least one mode and a fidelity in [0, 1]".into());
        }
        if self.threads == Some(0) {
            return bad("thread budget must be positive".into());
        }
        let positive = |xs: &[f64]| !xs.is_empty() && xs.iter().all(|x| x.is_finite() && *x >= 0.0);
        match self.kind {
            ExperimentKind::LevelStats if !positive(&self.gamma_ratios) => {
                return bad("gamma_ratios must be non-negative".into())
            }
            ExperimentKind::LevelStats if !(self.spectrum_fraction > 0.0 && self.spectrum_fraction <= 1.0) => {
                return bad("spectrum_fraction must lie in (0, 1]".into())
            }
            ExperimentKind::QuenchAccuracyVsTime if !positive(&self.times) => {
                return bad("times must be non-negative".into())
            }
            ExperimentKind::QuenchAccuracyVsSize if self.quench_times == 0 => {
                return bad("quench_times must be positive".into())
            }
            ExperimentKind::NoiseSweep
                if !positive(&self.coherence_times) || self.coherence_times.contains(&0.0) =>
            {
                return bad("coherence_times must be positive".into())
            }
            _ => {}
        }
        self.noise.validate()
    }

    /// SHA-256 of the canonical JSON of every field that affects results
    /// (`out_dir` and `threads` are excluded).
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        canonical.threads = None;
        let text = serde_json::to_string(&canonical)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    /// Noise applied by quench estimates in the diagnostics.
    pub fn diagnostic_noise(&self) -> NoiseConfig {
        if self.backend == Backend::QuenchNoisy {
            self.noise
        } else {
            NoiseConfig { amplitude_damping: false, dephasing: false, ..self.noise }
        }
    }
}

/// Seed of one random stream, a pure function of its coordinates.
pub fn derive_seed(master: u64, stream: &str, n_visible: usize, instance: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stream.as_bytes());
    h.update((n_visible as u64).to_le_bytes());
    h.update((instance as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Everything random about one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub index: usize,
    pub n_visible: usize,
    /// Seed of the training run (initialization, batches, quench times).
    pub train_seed: u64,
    /// Seed of the quench draws in the diagnostics.
    pub quench_seed: u64,
    pub data: BernoulliMixture,
    /// Diagnostic system: QBM biases and weights from N(0, 1), thermometer
    /// and interaction as in training, `Γ̄ = 1`.
    pub model: QbmModel,
}

/// Materialize `config.instances` instances for every `n_v`.
pub fn seed_instances(config: &ExperimentConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for &n_v in &config.n_visible {
        for index in 0..config.instances {
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "data", n_v, index));
            let data = BernoulliMixture::random(n_v, config.mixture_modes, config.mixture_fidelity, &mut data_rng)?;
            let mut model_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "model", n_v, index));
            let model = diagnostic_model(config, n_v, &mut model_rng)?;
            out.push(Instance {
                index,
                n_visible: n_v,
                train_seed: derive_seed(config.seed, "train", n_v, index),
                quench_seed: derive_seed(config.seed, "quench", n_v, index),
                data,
                model,
            });
        }
    }
    Ok(out)
}

fn diagnostic_model(config: &ExperimentConfig, n_v: usize, rng: &mut ChaCha8Rng) -> Result<QbmModel> {
    let layout = SystemLayout::new(n_v, config.n_hidden, config.n_thermometer)?;
    let spec = ModelSpec::standard(&layout, config.family);
    let mut params = init_parameters(&layout, &spec, &vec![0.0; n_v], &InitConfig::default(), rng)?;
    for s in layout.qbm_sites() {
        params.bias[s] = StandardNormal.sample(rng);
    }
    for w in params.weights.iter_mut() {
        *w = StandardNormal.sample(rng);
    }
    QbmModel::new(layout, spec, params)
}

/// Rescale the transverse fields to mean `Γ̄`, keeping each site's jitter.
pub fn with_mean_field(model: &QbmModel, gamma_mean: f64, base_mean: f64) -> QbmModel {
    let mut m = model.clone();
    for g in m.params.gamma.iter_mut() {
        *g = gamma_mean + (*g - base_mean);
    }
    m
}

/// One measured value of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub series: String,
    pub x: f64,
    pub instance: usize,
    pub seed: u64,
    pub metric: String,
    /// Observable name for per-observable rows, otherwise empty.
    pub label: String,
    pub value: f64,
    /// `ok`, `undefined` or `error: …`.
    pub status: String,
}

impl MetricRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok" && self.value.is_finite()
    }
}

/// Mean and standard error of one `(series, x, metric)` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub series: String,
    pub x: f64,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; NaN below two values.
    pub se: f64,
    pub median: f64,
    pub count: usize,
    pub failed: usize,
}

/// One row of `plotdata.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
    pub series: String,
}

/// Per-epoch KL of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub series: String,
    pub x: f64,
    pub instance: usize,
    pub epoch: usize,
    pub kl: f64,
    pub beta_therm: Option<f64>,
}

/// Everything an experiment produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kind: ExperimentKind,
    pub instances: usize,
    #[serde(skip)]
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip)]
    pub traces: Vec<TraceRow>,
}

impl RunRecord {
    pub fn aggregate(&self, series: &str, x: f64, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.series == series && a.x == x && a.metric == metric)
    }

    pub fn plot_points(&self) -> Vec<PlotPoint> {
        let metric = self.kind.primary_metric();
        self.aggregates
            .iter()
            .filter(|a| a.metric == metric)
            .map(|a| PlotPoint { x: a.x, y: a.mean, yerr: a.se, series: a.series.clone() })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status.starts_with("error")).count()
    }
}

/// Sample mean and standard error; `se` is NaN for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Group rows by `(series, x, metric)` in first-appearance order.
pub fn aggregate_rows(rows: &[MetricRow]) -> Vec<Aggregate> {
    let mut order: Vec<(String, u64, String)> = Vec::new();
    let mut groups: BTreeMap<(String, u64, String), (f64, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.series.clone(), r.x.to_bits(), r.metric.clone());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.x, Vec::new(), 0)
        });
        if r.is_ok() {
            entry.1.push(r.value);
        } else {
            entry.2 += 1;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (x, values, failed) = &groups[&key];
            let (mean, se) = mean_and_se(values);
            Aggregate {
                series: key.0,
                x: *x,
                metric: key.2,
                mean,
                se,
                median: median(values),
                count: values.len(),
                failed: *failed,
            }
        })
        .collect()
}

/// Ratio of one instance; `None` when the denominator is below `1e-9`.
pub fn kl_ratio_value(kl_quench: f64, kl_exact: f64, kl_rbm: f64) -> Option<f64> {
    let den = kl_rbm - kl_exact;
    if den.abs() < 1e-9 || !den.is_finite() || !kl_quench.is_finite() {
        return None;
    }
    Some((kl_quench - kl_exact) / den)
}

/// Per-`n_v` KL ratio over matched instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlRatioPoint {
    pub n_visible: usize,
    pub mean: f64,
    pub se: f64,
    pub defined: usize,
    pub undefined: usize,
}

/// Per-instance ratios (`min_kl` rows of the three series, matched on
/// `(x, instance)`) and their per-`n_v` summary.
pub fn kl_ratio(
    quench: &[MetricRow],
    exact: &[MetricRow],
    rbm: &[MetricRow],
) -> Result<(Vec<MetricRow>, Vec<KlRatioPoint>)> {
    let index = |rows: &[MetricRow]| -> BTreeMap<(u64, usize), MetricRow> {
        rows.iter()
            .filter(|r| r.metric == "min_kl")
            .map(|r| ((r.x.to_bits(), r.instance), r.clone()))
            .collect()
    };
    let (q, e, r) = (index(quench), index(exact), index(rbm));
    if q.keys().ne(e.keys()) || q.keys().ne(r.keys()) {
        return Err(Error::InvalidArgument("kl_ratio needs the same instances in all three records".into()));
    }
    let mut rows = Vec::new();
    for (key, rq) in &q {
        let (re, rr) = (&e[key], &r[key]);
        if rq.seed != re.seed || rq.seed != rr.seed {
            return Err(Error::InvalidArgument(format!("instance {} was seeded differently", rq.instance)));
        }
        let ratio = if rq.is_ok() && re.is_ok() && rr.is_ok() {
            kl_ratio_value(rq.value, re.value, rr.value)
        } else {
            None
        };
        rows.push(MetricRow {
            series: "kl-ratio".into(),
            x: rq.x,
            instance: rq.instance,
            seed: rq.seed,
            metric: "kl_ratio".into(),
            label: String::new(),
            value: ratio.unwrap_or(f64::NAN),
            status: if ratio.is_some() { "ok".into() } else { "undefined".into() },
        });
    }
    let mut points = Vec::new();
    for agg in aggregate_rows(&rows) {
        points.push(KlRatioPoint {
            n_visible: agg.x as usize,
            mean: agg.mean,
            se: agg.se,
            defined: agg.count,
            undefined: agg.failed,
        });
    }
    Ok((rows, points))
}

/// Run the sweep declared by `config`, writing its files when
/// `config.out_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let instances = seed_instances(config)?;
    let output = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| run_jobs(config, &instances)),
        None => run_jobs(config, &instances),
    }?;
    let mut rows = output.rows;
    if config.kind == ExperimentKind::KlRatio {
        let pick = |name: &str| rows.iter().filter(|r| r.series == name).cloned().collect::<Vec<_>>();
        let names = experiments::ratio_series(config);
        let (ratio_rows, _) = kl_ratio(&pick(&names.0), &pick(&names.1), &pick(&names.2))?;
        rows.extend(ratio_rows);
    }
    let record = RunRecord {
        config_hash: config.hash()?,
        kind: config.kind,
        instances: config.instances,
        aggregates: aggregate_rows(&rows),
        rows,
        traces: output.traces,
    };
    if let Some(dir) = &config.out_dir {
        write_record(dir, config, &record, &output.snapshots, &output.spacing)?;
    }
    let failures = record.failures();
    if failures > 0 {
        log::warn!("{}: {failures} instance failures recorded in metrics.csv", config.kind);
    }
    Ok(record)
}

fn write_record(
    dir: &Path,
    config: &ExperimentConfig,
    record: &RunRecord,
    snapshots: &[(String, String)],
    spacing: &[experiments::SpacingExport],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)? + "\n")?;
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(record)? + "\n")?;
    write_csv(&dir.join("metrics.csv"), &record.rows)?;
    write_csv(&dir.join("plotdata.csv"), &record.plot_points())?;
    if !record.traces.is_empty() {
        write_csv(&dir.join("traces.csv"), &record.traces)?;
    }
    if !snapshots.is_empty() {
        let params = dir.join("params");
        fs::create_dir_all(&params)?;
        for (name, text) in snapshots {
            fs::write(params.join(name), text)?;
        }
    }
    for export in spacing {
        let sub = dir.join("spacing");
        fs::create_dir_all(&sub)?;
        crate::spectral::write_spacing_report(&sub.join(&export.file), &export.sample, &export.fit, 40, 4.0)?;
    }
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
