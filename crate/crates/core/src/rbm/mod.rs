//! Classical restricted Boltzmann machine in the ±1 convention, trained by
//! persistent contrastive divergence.
//!
//! `p(v, h) ∝ exp(a·v + c·h + vᵀWh)`, so `P(h_η = +1 | v) = σ(2(c_η + Σ_υ W_υη v_υ))`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eval::visible_means;
use crate::optim::AdamState;
use crate::spin_ops::visible_bias_logit;
use crate::{Error, Result};


/// Cap on `n_v + n_h` for exact enumeration.
pub const MAX_EXACT_UNITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmParameters {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// Row-major `n_visible × n_hidden`.
    pub weights: Vec<f64>,
}

impl RbmParameters {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
            weights: vec![0.0; n_visible * n_hidden],
        }
    }

    /// Visible biases from the data means, small Gaussian hidden biases and
    /// weights (variances `2.5e-5` and `1e-4`).
    pub fn init<R: Rng + ?Sized>(
        n_visible: usize,
        n_hidden: usize,
        data_means: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        if data_means.len() != n_visible {
            return Err(Error::DimensionMismatch { expected: n_visible, got: data_means.len() });
        }
        let mut p = Self::zeros(n_visible, n_hidden);
        for (b, &m) in p.visible_bias.iter_mut().zip(data_means) {
            *b = visible_bias_logit(m, 1e-3);
        }
        let hidden = Normal::new(0.0, 2.5e-5f64.sqrt()).expect("valid normal");
        for c in p.hidden_bias.iter_mut() {
            *c = hidden.sample(rng);
        }
        let weight = Normal::new(0.0, 1e-4f64.sqrt()).expect("valid normal");
        for w in p.weights.iter_mut() {
            *w = weight.sample(rng);
        }
        Ok(p)
    }

    pub fn w(&self, v: usize, h: usize) -> f64 {
        self.weights[v * self.n_hidden + h]
    }

    pub fn validate(&self) -> Result<()> {
        if self.visible_bias.len() != self.n_visible
            || self.hidden_bias.len() != self.n_hidden
            || self.weights.len() != self.n_visible * self.n_hidden
        {
            return Err(Error::ParameterMismatch("RBM parameter shapes".into()));
        }
        if !self.flatten().iter().all(|x| x.is_finite()) {
            return Err(Error::ParameterMismatch("non-finite RBM parameter".into()));
        }
        Ok(())
    }

    pub fn trainable_count(&self) -> usize {
        self.n_visible + self.n_hidden + self.n_visible * self.n_hidden
    }

    /// `[a, c, W]` in that order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.visible_bias.clone();
        out.extend_from_slice(&self.hidden_bias);
        out.extend_from_slice(&self.weights);
        out
    }

    pub fn unflatten(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.trainable_count() {
            return Err(Error::DimensionMismatch { expected: self.trainable_count(), got: theta.len() });
        }
        let (a, rest) = theta.split_at(self.n_visible);
        let (c, w) = rest.split_at(self.n_hidden);
        self.visible_bias.copy_from_slice(a);
        self.hidden_bias.copy_from_slice(c);
        self.weights.copy_from_slice(w);
        Ok(())
    }

    /// `E(v, h) = −(a·v + c·h + vᵀWh)`.
    pub fn energy(&self, v: &[f64], h: &[f64]) -> f64 {
        let mut s: f64 = self.visible_bias.iter().zip(v).map(|(a, x)| a * x).sum();
        s += self.hidden_bias.iter().zip(h).map(|(c, y)| c * y).sum::<f64>();
        for (i, x) in v.iter().enumerate() {
            for (j, y) in h.iter().enumerate() {
                s += x * self.w(i, j) * y;
            }
        }
        -s
    }

    /// `c_η + Σ_υ W_υη v_υ`.
    pub fn hidden_field(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| self.hidden_bias[j] + v.iter().enumerate().map(|(i, x)| self.w(i, j) * x).sum::<f64>())
            .collect()
    }

    /// `a_υ + Σ_η W_υη h_η`.
    pub fn visible_field(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_visible)
            .map(|i| self.visible_bias[i] + h.iter().enumerate().map(|(j, y)| self.w(i, j) * y).sum::<f64>())
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `P(h_η = +1 | v)`.
pub fn hidden_probabilities(params: &RbmParameters, v: &[f64]) -> Vec<f64> {
    params.hidden_field(v).into_iter().map(|f| sigmoid(2.0 * f)).collect()
}

/// `P(v_υ = +1 | h)`.
pub fn visible_probabilities(params: &RbmParameters, h: &[f64]) -> Vec<f64> {
    params.visible_field(h).into_iter().map(|f| sigmoid(2.0 * f)).collect()
}

fn sample_spins<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<f64> {
    probs.iter().map(|p| if rng.gen::<f64>() < *p { 1.0 } else { -1.0 }).collect()
}

/// One block-Gibbs sweep: `h ~ p(h|v)`, then `v' ~ p(v|h)`.
pub fn gibbs_step<R: Rng + ?Sized>(
    params: &RbmParameters,
    visible: &[f64],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let h = sample_spins(&hidden_probabilities(params, visible), rng);
    let v = sample_spins(&visible_probabilities(params, &h), rng);
    (h, v)
}

/// Persistent fantasy particles, one per mini-batch slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcdState {
    pub chains: Vec<Vec<f64>>,
}

impl PcdState {
    /// Chains started from uniformly random visible configurations.
    pub fn random<R: Rng + ?Sized>(n_chains: usize, n_visible: usize, rng: &mut R) -> Self {
        let chains = (0..n_chains)
            .map(|_| (0..n_visible).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        Self { chains }
    }
}

/// Sufficient statistics `[⟨v⟩, ⟨h⟩, ⟨v h⟩]` with exact hidden means.
fn statistics(params: &RbmParameters, visibles: &[Vec<f64>]) -> Vec<f64> {
    let (nv, nh) = (params.n_visible, params.n_hidden);
    let mut s = vec![0.0; params.trainable_count()];
    for v in visibles {
        let h: Vec<f64> = params.hidden_field(v).into_iter().map(f64::tanh).collect();
        for i in 0..nv {
            s[i] += v[i];
        }
        for j in 0..nh {
            s[nv + j] += h[j];
        }
        for i in 0..nv {
            for j in 0..nh {
                s[nv + nh + i * nh + j] += v[i] * h[j];
            }
        }
    }
    let n = visibles.len() as f64;
    s.iter_mut().for_each(|x| *x /= n);
    s
}

/// Gradient of the negative log-likelihood, `neg − pos`, with one Gibbs
/// sweep applied to the chains first.
pub fn pcd_gradient<R: Rng + ?Sized>(
    params: &RbmParameters,
    batch: &[Vec<f64>],
    state: &mut PcdState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if batch.len() != state.chains.len() {
        return Err(Error::DimensionMismatch { expected: state.chains.len(), got: batch.len() });
    }
    if let Some(v) = batch.iter().chain(&state.chains).find(|v| v.len() != params.n_visible) {
        return Err(Error::DimensionMismatch { expected: params.n_visible, got: v.len() });
    }
    for chain in state.chains.iter_mut() {
        let (_, v) = gibbs_step(params, chain, rng);
        *chain = v;
    }
    let pos = statistics(params, batch);
    let neg = statistics(params, &state.chains);
    Ok(neg.iter().zip(&pos).map(|(n, p)| n - p).collect())
}

/// One PCD update through the shared Adam implementation.
pub fn pcd_update<R: Rng + ?Sized>(
    params: &mut RbmParameters,
    batch: &[Vec<f64>],
    state: &mut PcdState,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let grad = pcd_gradient(params, batch, state, rng)?;
    let mut theta = params.flatten();
    adam.step(&mut theta, &grad)?;
    params.unflatten(&theta)?;
    Ok(grad)
}

/// `p(v) ∝ exp(a·v) Π_η 2cosh(c_η + Σ_υ W_υη v_υ)` by enumeration over `v`.
pub fn rbm_distribution_exact(params: &RbmParameters) -> Result<Vec<f64>> {
    params.validate()?;
    if params.n_visible + params.n_hidden > MAX_EXACT_UNITS {
        return Err(Error::TooManyQubits { n: params.n_visible + params.n_hidden, max: MAX_EXACT_UNITS });
    }
    let nv = params.n_visible;
    let log_weights: Vec<f64> = (0..1usize << nv)
        .map(|k| {
            let v = crate::spin_ops::visible_assignment(k, nv);
            let a: f64 = params.visible_bias.iter().zip(&v).map(|(b, x)| b * x).sum();
            a + params.hidden_field(&v).iter().map(|f| log_2cosh(*f)).sum::<f64>()
        })
        .collect();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut table: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= sum);
    Ok(table)
}

fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Data means → initial parameters, as used by the trainer.
pub fn init_from_table<R: Rng + ?Sized>(
    table: &[f64],
    n_visible: usize,
    n_hidden: usize,
    rng: &mut R,
) -> Result<RbmParameters> {
    RbmParameters::init(n_visible, n_hidden, &visible_means(table, n_visible), rng)
}
