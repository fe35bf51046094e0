//! Gibbs and microcanonical ensembles, inverse-temperature inversion and the
//! quench sampler.

mod quench;

pub use quench::{
    energy_variance_diagnostic, plus_state, plus_state_variance, quench_sample,
    EnergyVarianceDiagnostic, ObservableSet, QuenchEstimate, QuenchState, QuenchSystem,
    ThermometerReading, VARIANCE_FLAG_THRESHOLD,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::EigenSystem;
use crate::spin_ops::{DenseOperator, PauliSum};
use crate::{Error, Result};

/// Uniform distribution of quench (and channel) durations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TimeWindow {
    /// `[√(2/π), 10√(2/π)]`.
    fn default() -> Self {
        let unit = (2.0 / PI).sqrt();
        Self { lo: unit, hi: 10.0 * unit }
    }
}

impl TimeWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.hi >= self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bad time window [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi == self.lo {
            return self.lo;
        }
        rng.gen_range(self.lo..self.hi)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Boltzmann weights `e^{−βE_k}/Z` and `ln Z`, stabilized by the extreme level.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let shift = energies
        .iter()
        .map(|&e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = energies.iter().map(|&e| (-beta * e - shift).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    (w, shift + sum.ln())
}

/// `ln Σ_k e^{−βE_k}`.
pub fn log_partition(energies: &[f64], beta: f64) -> f64 {
    gibbs_weights(energies, beta).1
}

/// `⟨H⟩_β`.
pub fn thermal_energy(energies: &[f64], beta: f64) -> f64 {
    let (w, _) = gibbs_weights(energies, beta);
    w.iter().zip(energies).map(|(p, e)| p * e).sum()
}

/// A canonical ensemble over a fixed spectrum.
#[derive(Clone, Debug)]
pub struct GibbsEnsemble<'a> {
    pub eigsys: &'a EigenSystem,
    pub beta: f64,
    probabilities: Vec<f64>,
    log_partition: f64,
}

impl<'a> GibbsEnsemble<'a> {
    pub fn new(eigsys: &'a EigenSystem, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta = {beta}")));
        }
        let (probabilities, log_partition) = gibbs_weights(eigsys.eigenvalues(), beta);
        Ok(Self { eigsys, beta, probabilities, log_partition })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn energy(&self) -> f64 {
        self.average(self.eigsys.eigenvalues())
    }

    /// `Σ_k p_k x_k` for per-eigenstate values `x_k`.
    pub fn average(&self, per_state: &[f64]) -> f64 {
        self.probabilities.iter().zip(per_state).map(|(p, x)| p * x).sum()
    }

    pub fn expectation(&self, op: &PauliSum) -> Result<f64> {
        Ok(self.average(&eigenstate_expectations(op, self.eigsys)?))
    }
}

/// `⟨E_k|O|E_k⟩` for every eigenstate, applying `O` term by term.
pub fn eigenstate_expectations(op: &PauliSum, eigsys: &EigenSystem) -> Result<Vec<f64>> {
    if op.dim() != eigsys.dim() {
        return Err(Error::DimensionMismatch { expected: eigsys.dim(), got: op.dim() });
    }
    Ok((0..eigsys.dim()).map(|k| op.expectation(eigsys.vector(k))).collect())
}

/// As [`eigenstate_expectations`] for a dense operator.
pub fn eigenstate_expectations_dense(op: &DenseOperator, eigsys: &EigenSystem) -> Result<Vec<f64>> {
    if op.dim() != eigsys.dim() {
        return Err(Error::DimensionMismatch { expected: eigsys.dim(), got: op.dim() });
    }
    (0..eigsys.dim()).map(|k| op.expectation(eigsys.vector(k))).collect()
}

/// `tr(O e^{−βH}) / tr(e^{−βH})`.
pub fn gibbs_expectation(op: &DenseOperator, eigsys: &EigenSystem, beta: f64) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian(op.hermiticity_error()));
    }
    let per_state = eigenstate_expectations_dense(op, eigsys)?;
    Ok(GibbsEnsemble::new(eigsys, beta)?.average(&per_state))
}

/// Default microcanonical window: spectral range over `√n`.
pub fn default_window(eigsys: &EigenSystem, n_qubits: usize) -> f64 {
    (eigsys.max_energy() - eigsys.ground_energy()) / (n_qubits.max(1) as f64).sqrt()
}

/// Average of `⟨E_k|O|E_k⟩` over eigenstates with `|E_k − Ē| ≤ ω/2`.
pub fn microcanonical_expectation(
    op: &DenseOperator,
    eigsys: &EigenSystem,
    e_bar: f64,
    omega: f64,
) -> Result<f64> {
    if op.dim() != eigsys.dim() {
        return Err(Error::DimensionMismatch { expected: eigsys.dim(), got: op.dim() });
    }
    let (lo, hi) = (e_bar - omega / 2.0, e_bar + omega / 2.0);
    let inside: Vec<usize> = eigsys
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, e)| (lo..=hi).contains(*e))
        .map(|(k, _)| k)
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let total: f64 = inside
        .iter()
        .map(|&k| op.expectation(eigsys.vector(k)))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / inside.len() as f64)
}

const MAX_BRACKET_DOUBLINGS: usize = 60;

/// The `β` with `⟨H⟩_β = target`, by bisection on the decreasing map
/// `β ↦ ⟨H⟩_β`. Negative `β` is returned for targets above the
/// infinite-temperature energy.
pub fn invert_beta(energies: &[f64], target: f64) -> Result<f64> {
    let (min, max) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    if !(target > min && target < max) {
        return Err(Error::EnergyOutOfRange { target, min, max });
    }
    let f = |beta: f64| thermal_energy(energies, beta) - target;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut grown = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > MAX_BRACKET_DOUBLINGS {
            return Err(Error::EnergyOutOfRange { target, min, max });
        }
    }
    while f(lo) < 0.0 {
        hi = lo;
        lo *= 2.0;
        grown += 1;
        if grown > MAX_BRACKET_DOUBLINGS {
            return Err(Error::EnergyOutOfRange { target, min, max });
        }
    }
    // f(lo) ≥ 0 ≥ f(hi)
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    Ok(if flo <= fhi { lo } else { hi })
}

/// `Σ_k |c_k|² ⟨E_k|O|E_k⟩` for energy-basis coefficients `c`.
pub fn diagonal_ensemble_average(
    coeffs: &[Complex64],
    per_state: &[f64],
) -> f64 {
    coeffs.iter().zip(per_state).map(|(c, x)| c.norm_sqr() * x).sum()
}

#[cfg(test)]
mod tests;
