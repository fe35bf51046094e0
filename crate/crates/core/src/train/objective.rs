//! Likelihood losses and their gradients.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::qbm_distribution_exact;
use crate::noise::NoiseConfig;
use crate::spectral::{eig_hermitian, EigenSystem};
use crate::spin_ops::{
    clamp_visible, trainable_observables, visible_assignment, HamiltonianTerms, PauliSum, QbmModel,
};
use crate::thermal::{
    eigenstate_expectations, gibbs_weights, quench_sample, GibbsEnsemble, ObservableSet,
    QuenchEstimate, QuenchSystem,
};
use crate::{Error, Result};

/// Guard below which a parameter change is treated as no change.
pub const MIN_PARAMETER_STEP: f64 = 1e-12;

/// Weighted visible configurations `(bitstring, weight)`; weights sum to one.
pub type DataWeights = Vec<(usize, f64)>;

/// Empirical weights of a mini-batch.
pub fn batch_weights(batch: &[usize]) -> DataWeights {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &k in batch {
        *counts.entry(k).or_default() += 1.0;
    }
    let n = batch.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c / n)).collect()
}

/// Non-zero entries of a probability table.
pub fn table_weights(table: &[f64]) -> DataWeights {
    table.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (k, *p)).collect()
}

/// `H_QBM` on the QBM sites only.
pub fn qbm_hamiltonian(model: &QbmModel) -> Result<PauliSum> {
    Ok(HamiltonianTerms::from_model(&model.qbm_only())?.qbm)
}

/// Gibbs state of one clamped Hamiltonian `H_{z_v}`.
struct ClampedEnsemble {
    z_v: Vec<f64>,
    offset: f64,
    beta: f64,
    /// `None` when nothing is left after clamping.
    eigsys: Option<EigenSystem>,
    weights: Vec<f64>,
    log_partition: f64,
}

impl ClampedEnsemble {
    fn new(h_qbm: &PauliSum, config: usize, n_visible: usize, beta: f64) -> Result<Self> {
        let z_v = visible_assignment(config, n_visible);
        let (reduced, offset) = clamp_visible(h_qbm, &z_v)?;
        if reduced.n_qubits() == 0 {
            return Ok(Self { z_v, offset, beta, eigsys: None, weights: vec![1.0], log_partition: 0.0 });
        }
        let eigsys = eig_hermitian(&reduced.to_dense())?;
        let (weights, log_partition) = gibbs_weights(eigsys.eigenvalues(), beta);
        Ok(Self { z_v, offset, beta, eigsys: Some(eigsys), weights, log_partition })
    }

    /// `ln tr e^{−βH_{z_v}}`.
    fn log_trace(&self) -> f64 {
        -self.beta * self.offset + self.log_partition
    }

    fn energy(&self) -> f64 {
        let inner: f64 = match &self.eigsys {
            Some(e) => self.weights.iter().zip(e.eigenvalues()).map(|(p, x)| p * x).sum(),
            None => 0.0,
        };
        self.offset + inner
    }

    fn expectation(&self, op: &PauliSum) -> Result<f64> {
        let (reduced, offset) = clamp_visible(op, &self.z_v)?;
        let inner = match &self.eigsys {
            Some(e) if !reduced.is_empty() => {
                let per_state = eigenstate_expectations(&reduced, e)?;
                self.weights.iter().zip(&per_state).map(|(p, x)| p * x).sum()
            }
            _ => 0.0,
        };
        Ok(offset + inner)
    }
}

/// `−Σ p_data ln p_β(z_v)` with the exact QBM marginal. Infinite when the
/// model gives zero probability to observed data.
pub fn loss_exact(model: &QbmModel, beta: f64, p_data: &[f64]) -> Result<f64> {
    let p_model = qbm_distribution_exact(model, beta)?;
    if p_model.len() != p_data.len() {
        return Err(Error::DimensionMismatch { expected: p_model.len(), got: p_data.len() });
    }
    let mut loss = 0.0;
    for (p, q) in p_data.iter().zip(&p_model) {
        if *p > 0.0 {
            if *q <= 0.0 {
                log::warn!("model assigns zero probability to observed data");
                return Ok(f64::INFINITY);
            }
            loss -= p * q.ln();
        }
    }
    Ok(loss)
}

/// `−Σ p_data ln[tr e^{−βH_{z_v}} / tr e^{−βH_QBM}]`.
pub fn loss_upper(model: &QbmModel, beta: f64, p_data: &[f64]) -> Result<f64> {
    let n_v = model.layout.n_visible;
    if p_data.len() != 1 << n_v {
        return Err(Error::DimensionMismatch { expected: 1 << n_v, got: p_data.len() });
    }
    let h = qbm_hamiltonian(model)?;
    let eigsys = eig_hermitian(&h.to_dense())?;
    let (_, log_z) = gibbs_weights(eigsys.eigenvalues(), beta);
    let mut loss = 0.0;
    for (k, p) in table_weights(p_data) {
        loss -= p * (ClampedEnsemble::new(&h, k, n_v, beta)?.log_trace() - log_z);
    }
    Ok(loss)
}

/// Expectations of the trainable observables together with the QBM energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub observables: Vec<f64>,
    pub energy: f64,
}

/// `E_data[⟨O_θ⟩_{z_v}]` and `E_data[⟨H_{z_v}⟩]` on the clamped QBM.
pub fn positive_phase(model: &QbmModel, beta: f64, data: &[(usize, f64)]) -> Result<PhaseStats> {
    let qbm = model.qbm_only();
    let n_v = qbm.layout.n_visible;
    let h = HamiltonianTerms::from_model(&qbm)?.qbm;
    let ops = trainable_observables(&qbm.layout, &qbm.spec);
    let mut observables = vec![0.0; ops.len()];
    let mut energy = 0.0;
    for &(k, w) in data {
        if k >> n_v != 0 {
            return Err(Error::InvalidArgument(format!("configuration {k} exceeds {n_v} visible bits")));
        }
        let ens = ClampedEnsemble::new(&h, k, n_v, beta)?;
        for (acc, op) in observables.iter_mut().zip(&ops) {
            *acc += w * ens.expectation(op)?;
        }
        energy += w * ens.energy();
    }
    Ok(PhaseStats { observables, energy })
}

/// Model expectations from the exact Gibbs state of `H_QBM`.
pub fn negative_phase_exact(model: &QbmModel, beta: f64) -> Result<PhaseStats> {
    let qbm = model.qbm_only();
    let h = HamiltonianTerms::from_model(&qbm)?.qbm;
    let eigsys = eig_hermitian(&h.to_dense())?;
    let ens = GibbsEnsemble::new(&eigsys, beta)?;
    let observables = trainable_observables(&qbm.layout, &qbm.spec)
        .iter()
        .map(|op| ens.expectation(op))
        .collect::<Result<_>>()?;
    Ok(PhaseStats { observables, energy: ens.energy() })
}

/// Observables measured in a training quench: the trainable observables,
/// then `H_QBM` (named `h_qbm`).
pub fn quench_observables(model: &QbmModel) -> Result<ObservableSet> {
    let mut set = ObservableSet::new();
    let ops = trainable_observables(&model.layout, &model.spec);
    let n_qbm = model.layout.n_qbm();
    let n_bias = n_qbm;
    for (i, op) in ops.into_iter().enumerate() {
        let name = if i < n_bias {
            format!("z{i}")
        } else {
            format!("w{}", model.spec.qbm_edges[i - n_bias].key())
        };
        set.push(name, op);
    }
    set.push("h_qbm", HamiltonianTerms::from_model(model)?.qbm);
    Ok(set)
}

/// Model expectations from a quench of the full system; `β` is the
/// thermometer reading.
pub fn negative_phase_quench<R: Rng + ?Sized>(
    model: &QbmModel,
    system: &QuenchSystem,
    times: &[f64],
    noise: Option<&NoiseConfig>,
    rng: &mut R,
) -> Result<(PhaseStats, f64, QuenchEstimate)> {
    let set = quench_observables(model)?;
    let est = quench_sample(system, &set, times, noise, rng)?;
    let reading = est
        .thermometer
        .ok_or_else(|| Error::InvalidArgument("quench backend needs a thermometer".into()))?;
    let (energy, observables) = est.values.split_last().expect("h_qbm is always measured");
    let stats = PhaseStats { observables: observables.to_vec(), energy: *energy };
    Ok((stats, reading.beta, est))
}

/// `∂_θ L̃` split into its three contributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub total: Vec<f64>,
    /// `β E_data[⟨O_θ⟩_{z_v}]`.
    pub positive: Vec<f64>,
    /// `−β ⟨O_θ⟩_model`.
    pub negative: Vec<f64>,
    /// `g_θ`.
    pub beta_correction: Vec<f64>,
    pub beta: f64,
    /// Set when `β ≤ 0`.
    pub beta_flagged: bool,
}

impl GradientEstimate {
    /// Combine the phases. `dbeta_dtheta = None` drops the correction term.
    pub fn assemble(
        beta: f64,
        positive: &PhaseStats,
        negative: &PhaseStats,
        dbeta_dtheta: Option<&[f64]>,
    ) -> Result<Self> {
        let n = positive.observables.len();
        if negative.observables.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: negative.observables.len() });
        }
        let pos: Vec<f64> = positive.observables.iter().map(|o| beta * o).collect();
        let neg: Vec<f64> = negative.observables.iter().map(|o| -beta * o).collect();
        let gap = positive.energy - negative.energy;
        let corr: Vec<f64> = match dbeta_dtheta {
            Some(d) if d.len() != n => return Err(Error::DimensionMismatch { expected: n, got: d.len() }),
            Some(d) => d.iter().map(|x| x * gap).collect(),
            None => vec![0.0; n],
        };
        let total: Vec<f64> = (0..n).map(|i| pos[i] + neg[i] + corr[i]).collect();
        let bad: Vec<usize> = total.iter().enumerate().filter(|(_, g)| !g.is_finite()).map(|(i, _)| i).collect();
        if !bad.is_empty() {
            return Err(Error::NonFiniteGradient(bad));
        }
        Ok(Self { total, positive: pos, negative: neg, beta_correction: corr, beta, beta_flagged: beta <= 0.0 })
    }
}

/// Gradient at fixed `β` with the exact Gibbs negative phase (`g_θ = 0`).
pub fn gradient_exact(model: &QbmModel, beta: f64, data: &[(usize, f64)]) -> Result<GradientEstimate> {
    let pos = positive_phase(model, beta, data)?;
    let neg = negative_phase_exact(model, beta)?;
    GradientEstimate::assemble(beta, &pos, &neg, None)
}

/// Gradient with the quench negative phase at the thermometer's `β`.
pub fn gradient_quench<R: Rng + ?Sized>(
    model: &QbmModel,
    system: &QuenchSystem,
    times: &[f64],
    noise: Option<&NoiseConfig>,
    data: &[(usize, f64)],
    dbeta_dtheta: Option<&[f64]>,
    rng: &mut R,
) -> Result<(GradientEstimate, QuenchEstimate)> {
    let (neg, beta, est) = negative_phase_quench(model, system, times, noise, rng)?;
    if beta <= 0.0 {
        log::debug!("thermometer reports beta = {beta:.4}");
    }
    let pos = positive_phase(model, beta, data)?;
    Ok((GradientEstimate::assemble(beta, &pos, &neg, dbeta_dtheta)?, est))
}

/// The last two `(β, θ)` pairs seen during training.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BetaHistory {
    entries: VecDeque<(f64, Vec<f64>)>,
}

impl BetaHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the `β` measured at parameters `theta`.
    pub fn record(&mut self, beta: f64, theta: &[f64]) {
        self.entries.push_back((beta, theta.to_vec()));
        while self.entries.len() > 2 {
            self.entries.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Δβ/Δθ_i` from the last two records; zero without history or where
/// `|Δθ_i| < 1e-12`.
pub fn estimate_dbeta_dtheta(history: &BetaHistory, n_params: usize) -> Vec<f64> {
    if history.entries.len() < 2 {
        return vec![0.0; n_params];
    }
    let (b0, t0) = &history.entries[0];
    let (b1, t1) = &history.entries[1];
    let db = b1 - b0;
    t1.iter()
        .zip(t0)
        .map(|(x1, x0)| {
            let dt = x1 - x0;
            if dt.abs() < MIN_PARAMETER_STEP {
                0.0
            } else {
                db / dt
            }
        })
        .collect()
}
