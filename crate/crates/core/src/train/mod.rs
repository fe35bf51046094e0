//! QBM losses, gradients and the training loop, shared with the RBM
//! baseline.

mod objective;
mod run;


use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use objective::{
    batch_weights, estimate_dbeta_dtheta, gradient_exact, gradient_quench, loss_exact, loss_upper,
    negative_phase_exact, negative_phase_quench, positive_phase, qbm_hamiltonian,
    quench_observables, table_weights, BetaHistory, DataWeights, GradientEstimate, PhaseStats,
    MIN_PARAMETER_STEP,
};
pub use run::{
    read_metrics_csv, resume, train, write_metrics_csv, Checkpoint, EpochMetrics, ModelState,
    RunConfig, TrainRun, Trainer,
};

use crate::noise::NoiseConfig;
use crate::spin_ops::Family;
use crate::thermal::TimeWindow;
use crate::{Error, Result};

/// A QBM family or the classical RBM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Qbm(Family),
    Rbm,
}

impl ModelKind {
    pub fn family(&self) -> Option<Family> {
        match self {
            ModelKind::Qbm(f) => Some(*f),
            ModelKind::Rbm => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Qbm(family) => write!(f, "{family}"),
            ModelKind::Rbm => write!(f, "rbm"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "rbm" {
            Ok(ModelKind::Rbm)
        } else {
            Ok(ModelKind::Qbm(s.parse()?))
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.to_string()
    }
}

/// Source of the negative phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Backend {
    /// Exact Gibbs state of `H_QBM` at a fixed `β`.
    #[serde(rename = "exact-gibbs")]
    ExactGibbs,
    /// Quench sampler with shot noise.
    #[serde(rename = "quench")]
    Quench,
    /// Quench sampler with shot noise and decoherence channels.
    #[serde(rename = "quench+noise")]
    QuenchNoisy,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::ExactGibbs, Backend::Quench, Backend::QuenchNoisy];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::ExactGibbs => "exact-gibbs",
            Backend::Quench => "quench",
            Backend::QuenchNoisy => "quench+noise",
        }
    }

    pub fn is_quench(&self) -> bool {
        !matches!(self, Backend::ExactGibbs)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown backend {s:?}")))
    }
}

/// Tuned Adam step sizes per model and backend.
pub fn default_learning_rate(model: ModelKind, backend: Backend) -> f64 {
    use Family::*;
    match (model, backend.is_quench()) {
        (ModelKind::Rbm, _) => 1.25e-3,
        (ModelKind::Qbm(SemiRestrictedTransverseIsing), false) => 4e-3,
        (ModelKind::Qbm(RestrictedTransverseIsing), false) => 2.25e-3,
        (ModelKind::Qbm(RestrictedXx), false) => 3e-3,
        (ModelKind::Qbm(SemiRestrictedTransverseIsing), true) => 2e-3,
        (ModelKind::Qbm(RestrictedTransverseIsing), true) => 2.25e-3,
        (ModelKind::Qbm(RestrictedXx), true) => 5e-4,
    }
}

fn default_hidden() -> usize {
    1
}

fn default_thermometer() -> usize {
    2
}

fn default_beta_correction() -> bool {
    true
}

/// Everything needed to reproduce one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub backend: Backend,
    pub n_visible: usize,
    #[serde(default = "default_hidden")]
    pub n_hidden: usize,
    /// Ignored by the exact backend and the RBM.
    #[serde(default = "default_thermometer")]
    pub n_thermometer: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub points_per_epoch: usize,
    /// Quench times averaged per mini-batch.
    pub quench_times: usize,
    pub time_window: TimeWindow,
    /// Fixed quench times used for the per-epoch model table.
    pub eval_times: usize,
    /// Samples behind the final KL/AIC.
    pub final_samples: usize,
    /// `β` of the exact backend.
    pub exact_beta: f64,
    pub gamma_mean: f64,
    /// Shots and coherence times; channels only act with `quench+noise`.
    pub noise: NoiseConfig,
    #[serde(default = "default_beta_correction")]
    pub beta_correction: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// Reference protocol: batch 16, 40 epochs of 512 points, two quench
    /// times, 1000 shots, `T1 = T_φ = 75`, one hidden unit, two
    /// thermometer qubits.
    pub fn reference(model: ModelKind, backend: Backend, n_visible: usize, seed: u64) -> Self {
        Self {
            model,
            backend,
            n_visible,
            n_hidden: 1,
            n_thermometer: 2,
            learning_rate: default_learning_rate(model, backend),
            batch_size: 16,
            epochs: 40,
            points_per_epoch: 512,
            quench_times: 2,
            time_window: TimeWindow::default(),
            eval_times: 32,
            final_samples: crate::eval::FINAL_SAMPLE_BUDGET,
            exact_beta: 1.0,
            gamma_mean: 1.0,
            noise: NoiseConfig::reference(),
            beta_correction: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.n_visible == 0 {
            return bad("n_visible must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.points_per_epoch == 0 {
            return bad("batch size, epochs and points per epoch must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.final_samples == 0 {
            return bad("final sample budget must be positive");
        }
        if !self.exact_beta.is_finite() {
            return bad("exact beta must be finite");
        }
        self.time_window.validate()?;
        if self.model != ModelKind::Rbm && self.backend.is_quench() {
            if self.n_thermometer == 0 {
                return bad("quench backends need thermometer qubits");
            }
            if self.quench_times == 0 || self.eval_times == 0 {
                return bad("quench backends need at least one quench time");
            }
            self.noise.validate()?;
        }
        Ok(())
    }

    /// Noise actually applied by the backend.
    pub fn effective_noise(&self) -> Option<NoiseConfig> {
        match self.backend {
            Backend::ExactGibbs => None,
            Backend::Quench => Some(NoiseConfig {
                amplitude_damping: false,
                dephasing: false,
                ..self.noise
            }),
            Backend::QuenchNoisy => Some(self.noise),
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.points_per_epoch.div_ceil(self.batch_size)
    }
}
