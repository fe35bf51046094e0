//! The epoch loop, run directories and checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{
    batch_weights, estimate_dbeta_dtheta, gradient_exact, loss_exact, loss_upper,
    negative_phase_quench, positive_phase, BetaHistory, GradientEstimate,
};
use super::{ModelKind, TrainConfig};
use crate::eval::{
    aic, check_normalized, kl_divergence, negative_log_likelihood, qbm_distribution_exact,
    resample_table, BernoulliMixture, MetricReport, KL_FLOOR,
};
use crate::noise::NoiseConfig;
use crate::optim::{AdamConfig, AdamState};
use crate::rbm::{init_from_table, pcd_update, rbm_distribution_exact, PcdState, RbmParameters};
use crate::spin_ops::{
    init_parameters, visible_assignment, InitConfig, ModelDocument, ModelSpec, QbmModel,
    SystemLayout,
};
use crate::thermal::{quench_sample, ObservableSet, QuenchSystem};
use crate::{Error, Result};

/// The training configuration together with its data distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: BernoulliMixture,
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Not defined for the RBM.
    pub loss_upper: Option<f64>,
    pub loss_exact: f64,
    pub kl: f64,
    pub aic: f64,
    /// Exact backend: the fixed `β`; quench backends: the thermometer
    /// reading used for the losses; RBM: empty.
    pub beta_therm: Option<f64>,
}

/// Trainable state of either kind of model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelState {
    Qbm { model: ModelDocument },
    Rbm { params: RbmParameters, chains: PcdState },
}

impl ModelState {
    /// Parameter snapshot as written to `params_*.json`.
    fn snapshot(&self) -> Result<String> {
        let text = match self {
            ModelState::Qbm { model } => serde_json::to_string_pretty(model)?,
            ModelState::Rbm { params, .. } => serde_json::to_string_pretty(params)?,
        };
        Ok(text + "\n")
    }
}

#[derive(Clone, Debug)]
enum Learner {
    Qbm(QbmModel),
    Rbm(RbmParameters, PcdState),
}

impl Learner {
    fn state(&self, seed: u64) -> ModelState {
        match self {
            Learner::Qbm(m) => ModelState::Qbm { model: m.to_document(Some(seed)) },
            Learner::Rbm(p, c) => ModelState::Rbm { params: p.clone(), chains: c.clone() },
        }
    }

    fn from_state(state: &ModelState) -> Result<Self> {
        Ok(match state {
            ModelState::Qbm { model } => Learner::Qbm(QbmModel::from_document(model)?),
            ModelState::Rbm { params, chains } => Learner::Rbm(params.clone(), chains.clone()),
        })
    }

    fn trainable_count(&self) -> usize {
        match self {
            Learner::Qbm(m) => m.trainable_count(),
            Learner::Rbm(p, _) => p.trainable_count(),
        }
    }
}

/// Everything needed to continue a run after its last completed epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: ModelState,
    pub adam: AdamState,
    pub history: BetaHistory,
    pub rng: ChaCha8Rng,
    pub metrics: Vec<EpochMetrics>,
    pub wall_times: Vec<f64>,
    pub beta_trace: Vec<f64>,
    pub best: Option<(usize, f64, ModelState)>,
    pub eval_times: Vec<f64>,
}

/// Outcome of a completed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: RunConfig,
    /// Epoch 0 is the initial model.
    pub metrics: Vec<EpochMetrics>,
    /// `β` used by every mini-batch update.
    pub beta_trace: Vec<f64>,
    pub best_epoch: usize,
    /// Smallest per-epoch table KL over epochs `1..=epochs`.
    pub min_kl: f64,
    pub min_aic: f64,
    /// KL/AIC of the best parameters from `final_samples` model samples.
    pub final_report: MetricReport,
    pub best: ModelState,
}

impl TrainRun {
    pub fn initial_kl(&self) -> f64 {
        self.metrics[0].kl
    }

    pub fn kl_trace(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.kl).collect()
    }
}

/// Stateful trainer; see [`train`] and [`resume`].
pub struct Trainer {
    run: RunConfig,
    data_table: Vec<f64>,
    learner: Learner,
    adam: AdamState,
    history: BetaHistory,
    rng: ChaCha8Rng,
    epoch: usize,
    metrics: Vec<EpochMetrics>,
    wall_times: Vec<f64>,
    beta_trace: Vec<f64>,
    best: Option<(usize, f64, ModelState)>,
    eval_times: Vec<f64>,
    noise: Option<NoiseConfig>,
    out_dir: Option<PathBuf>,
}

impl Trainer {
    /// Initialize the model, evaluate it as epoch 0 and, with `out_dir`,
    /// write `config.json` and the first checkpoint.
    pub fn new(run: RunConfig, out_dir: Option<&Path>) -> Result<Self> {
        let cfg = &run.train;
        cfg.validate()?;
        run.data.validate()?;
        if run.data.n_visible != cfg.n_visible {
            return Err(Error::DimensionMismatch { expected: cfg.n_visible, got: run.data.n_visible });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let data_table = run.data.table();
        let learner = match cfg.model {
            ModelKind::Qbm(family) => {
                let layout = SystemLayout::new(cfg.n_visible, cfg.n_hidden, cfg.n_thermometer)?;
                let spec = ModelSpec::standard(&layout, family);
                let init = InitConfig {
                    gamma_mean: cfg.gamma_mean,
                    visible_bias_sign: if cfg.backend.is_quench() { 1.0 } else { -1.0 },
                    ..InitConfig::default()
                };
                let params = init_parameters(&layout, &spec, &run.data.means(), &init, &mut rng)?;
                Learner::Qbm(QbmModel::new(layout, spec, params)?)
            }
            ModelKind::Rbm => {
                let params = init_from_table(&data_table, cfg.n_visible, cfg.n_hidden, &mut rng)?;
                Learner::Rbm(params, PcdState::random(cfg.batch_size, cfg.n_visible, &mut rng))
            }
        };
        let quench = matches!(learner, Learner::Qbm(_)) && cfg.backend.is_quench();
        let eval_times = if quench { cfg.time_window.sample_n(cfg.eval_times, &mut rng) } else { Vec::new() };
        let adam = AdamState::new(learner.trainable_count(), AdamConfig::with_alpha(cfg.learning_rate));
        let noise = if matches!(learner, Learner::Qbm(_)) { cfg.effective_noise() } else { None };
        let mut trainer = Self {
            data_table,
            learner,
            adam,
            history: BetaHistory::new(),
            rng,
            epoch: 0,
            metrics: Vec::new(),
            wall_times: Vec::new(),
            beta_trace: Vec::new(),
            best: None,
            eval_times,
            noise,
            out_dir: out_dir.map(Path::to_path_buf),
            run,
        };
        let start = Instant::now();
        let m0 = trainer.evaluate(0)?;
        trainer.metrics.push(m0);
        trainer.wall_times.push(start.elapsed().as_secs_f64());
        if let Some(dir) = &trainer.out_dir {
            fs::create_dir_all(dir)?;
            write_json(&dir.join("config.json"), &trainer.run)?;
        }
        trainer.persist()?;
        Ok(trainer)
    }

    pub fn from_checkpoint(run: RunConfig, ckpt: Checkpoint, out_dir: Option<&Path>) -> Result<Self> {
        run.train.validate()?;
        let learner = Learner::from_state(&ckpt.model)?;
        let noise = if matches!(learner, Learner::Qbm(_)) { run.train.effective_noise() } else { None };
        Ok(Self {
            data_table: run.data.table(),
            learner,
            adam: ckpt.adam,
            history: ckpt.history,
            rng: ckpt.rng,
            epoch: ckpt.epoch,
            metrics: ckpt.metrics,
            wall_times: ckpt.wall_times,
            beta_trace: ckpt.beta_trace,
            best: ckpt.best,
            eval_times: ckpt.eval_times,
            noise,
            out_dir: out_dir.map(Path::to_path_buf),
            run,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            epoch: self.epoch,
            model: self.learner.state(self.run.train.seed),
            adam: self.adam.clone(),
            history: self.history.clone(),
            rng: self.rng.clone(),
            metrics: self.metrics.clone(),
            wall_times: self.wall_times.clone(),
            beta_trace: self.beta_trace.clone(),
            best: self.best.clone(),
            eval_times: self.eval_times.clone(),
        }
    }

    /// Run the remaining epochs and the final evaluation.
    pub fn run(mut self) -> Result<TrainRun> {
        while self.epoch < self.run.train.epochs {
            self.run_epoch()?;
        }
        self.finish()
    }

    /// One epoch. On failure the trainer should be discarded; the last
    /// checkpoint on disk is still consistent.
    pub fn run_epoch(&mut self) -> Result<()> {
        let epoch = self.epoch + 1;
        let start = Instant::now();
        self.train_epoch()
            .and_then(|_| self.evaluate(epoch))
            .map(|m| {
                self.metrics.push(m);
                self.wall_times.push(start.elapsed().as_secs_f64());
                self.epoch = epoch;
            })
            .and_then(|_| self.persist())
            .map_err(|e| {
                log::error!("epoch {epoch} aborted: {e}");
                Error::TrainingAborted { epoch, source: Box::new(e) }
            })
    }

    fn train_epoch(&mut self) -> Result<()> {
        let cfg = self.run.train.clone();
        let points = self.run.data.sample(cfg.points_per_epoch, &mut self.rng);
        for batch in points.chunks(cfg.batch_size) {
            self.step(batch)?;
        }
        Ok(())
    }

    fn step(&mut self, batch: &[usize]) -> Result<()> {
        let cfg = &self.run.train;
        match &mut self.learner {
            Learner::Qbm(model) => {
                let weights = batch_weights(batch);
                let grad = if cfg.backend.is_quench() {
                    let system = QuenchSystem::new(model)?;
                    let times = cfg.time_window.sample_n(cfg.quench_times, &mut self.rng);
                    let (neg, beta, _) =
                        negative_phase_quench(model, &system, &times, self.noise.as_ref(), &mut self.rng)?;
                    self.history.record(beta, &model.trainable());
                    let dbeta = cfg
                        .beta_correction
                        .then(|| estimate_dbeta_dtheta(&self.history, model.trainable_count()));
                    let pos = positive_phase(model, beta, &weights)?;
                    GradientEstimate::assemble(beta, &pos, &neg, dbeta.as_deref())?
                } else {
                    gradient_exact(model, cfg.exact_beta, &weights)?
                };
                let mut theta = model.trainable();
                self.adam.step(&mut theta, &grad.total)?;
                model.set_trainable(&theta)?;
                self.beta_trace.push(grad.beta);
            }
            Learner::Rbm(params, chains) => {
                let visibles: Vec<Vec<f64>> =
                    batch.iter().map(|&k| visible_assignment(k, cfg.n_visible)).collect();
                // The final short batch reuses the leading chains.
                if visibles.len() == chains.chains.len() {
                    pcd_update(params, &visibles, chains, &mut self.adam, &mut self.rng)?;
                } else {
                    let mut partial = PcdState { chains: chains.chains[..visibles.len()].to_vec() };
                    pcd_update(params, &visibles, &mut partial, &mut self.adam, &mut self.rng)?;
                    chains.chains[..visibles.len()].clone_from_slice(&partial.chains);
                }
            }
        }
        Ok(())
    }

    /// Model table used for per-epoch metrics, plus the `β` it was read at.
    fn model_table(&mut self, learner: &Learner) -> Result<(Vec<f64>, Option<f64>)> {
        let cfg = &self.run.train;
        match learner {
            Learner::Qbm(model) if cfg.backend.is_quench() => {
                let system = QuenchSystem::new(model)?;
                let est = quench_sample(
                    &system,
                    &ObservableSet::new(),
                    &self.eval_times,
                    self.noise.as_ref(),
                    &mut self.rng,
                )?;
                let beta = est.thermometer.map(|r| r.beta);
                let table = system.visible_distribution(&self.eval_times, self.noise.as_ref(), &mut self.rng)?;
                Ok((table, beta))
            }
            Learner::Qbm(model) => Ok((qbm_distribution_exact(model, cfg.exact_beta)?, Some(cfg.exact_beta))),
            Learner::Rbm(params, _) => Ok((rbm_distribution_exact(params)?, None)),
        }
    }

    fn evaluate(&mut self, epoch: usize) -> Result<EpochMetrics> {
        let learner = self.learner.clone();
        let (table, beta) = self.model_table(&learner)?;
        check_normalized(&table)?;
        let kl = kl_divergence(&self.data_table, &table)?;
        if kl.floored {
            log::warn!("epoch {epoch}: model table below {KL_FLOOR:e} on the data support");
        }
        let floored: Vec<f64> = table.iter().map(|q| q.max(KL_FLOOR)).collect();
        let table_loss = negative_log_likelihood(&self.data_table, &floored)?;
        let count = learner.trainable_count();
        let (loss_exact_value, loss_upper_value) = match (&learner, beta) {
            (Learner::Qbm(model), Some(b)) => {
                (loss_exact(model, b, &self.data_table)?, Some(loss_upper(model, b, &self.data_table)?))
            }
            _ => (table_loss, None),
        };
        Ok(EpochMetrics {
            epoch,
            loss_upper: loss_upper_value,
            loss_exact: loss_exact_value,
            kl: kl.nats,
            aic: aic(table_loss, count),
            beta_therm: beta,
        })
    }

    fn persist(&mut self) -> Result<()> {
        let latest = self.metrics.last().expect("epoch 0 is always evaluated").clone();
        let state = self.learner.state(self.run.train.seed);
        let improves = latest.epoch > 0 && self.best.as_ref().map_or(true, |(_, kl, _)| latest.kl < *kl);
        if improves || self.best.is_none() && self.run.train.epochs == 0 {
            self.best = Some((latest.epoch, latest.kl, state.clone()));
        }
        let Some(dir) = self.out_dir.clone() else {
            return Ok(());
        };
        fs::write(dir.join(format!("params_epoch_{}.json", latest.epoch)), state.snapshot()?)?;
        if let Some((_, _, best)) = &self.best {
            fs::write(dir.join("params_best.json"), best.snapshot()?)?;
        }
        write_metrics_csv(&dir.join("metrics.csv"), &self.metrics, &self.wall_times)?;
        write_json(&dir.join("checkpoint.json"), &self.checkpoint())?;
        Ok(())
    }

    fn finish(mut self) -> Result<TrainRun> {
        let (best_epoch, min_kl, best) = match self.best.clone() {
            Some(b) => b,
            None => (0, self.metrics[0].kl, self.learner.state(self.run.train.seed)),
        };
        let min_aic = self
            .metrics
            .iter()
            .filter(|m| m.epoch > 0 || self.metrics.len() == 1)
            .map(|m| m.aic)
            .fold(f64::INFINITY, f64::min);
        let learner = Learner::from_state(&best)?;
        let (table, _) = self.model_table(&learner)?;
        let budget = self.run.train.final_samples;
        let sampled = resample_table(&table, budget, &mut self.rng)?;
        let final_report =
            MetricReport::evaluate(&self.data_table, &sampled, learner.trainable_count(), Some(budget))?;
        if let Some(dir) = &self.out_dir {
            final_report.write_json(&dir.join("final_metrics.json"))?;
        }
        Ok(TrainRun {
            config: self.run,
            metrics: self.metrics,
            beta_trace: self.beta_trace,
            best_epoch,
            min_kl,
            min_aic,
            final_report,
            best,
        })
    }
}

/// Train from scratch; with `out_dir` the run directory is written as it
/// goes.
pub fn train(run: RunConfig, out_dir: Option<&Path>) -> Result<TrainRun> {
    Trainer::new(run, out_dir)?.run()
}

/// Continue the run in `dir` from its last checkpoint.
pub fn resume(dir: &Path) -> Result<TrainRun> {
    let run: RunConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(dir.join("checkpoint.json"))?)?;
    log::info!("resuming {} after epoch {}", dir.display(), ckpt.epoch);
    Trainer::from_checkpoint(run, ckpt, Some(dir))?.run()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Write `metrics.csv`; `wall_times[k]` is the wall time of epoch `k` and
/// is left empty when missing.
pub fn write_metrics_csv(path: &Path, rows: &[EpochMetrics], wall_times: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(MetricsRow {
            epoch: row.epoch,
            loss_upper: row.loss_upper,
            loss_exact: row.loss_exact,
            kl: row.kl,
            aic: row.aic,
            beta_therm: row.beta_therm,
            wall_time_s: wall_times.get(row.epoch).copied(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Read `metrics.csv`, ignoring the wall-time column.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Serialize)]
struct MetricsRow {
    epoch: usize,
    loss_upper: Option<f64>,
    loss_exact: f64,
    kl: f64,
    aic: f64,
    beta_therm: Option<f64>,
    wall_time_s: Option<f64>,
}
