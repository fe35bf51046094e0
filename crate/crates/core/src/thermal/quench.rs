use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{diagonal_ensemble_average, eigenstate_expectations, invert_beta};
use crate::noise::{apply_channels, shot_noise, DensityState, NoiseConfig};
use crate::spectral::{eig_hermitian, EigenSystem};
use crate::spin_ops::{DenseOperator, HamiltonianTerms, PauliString, PauliSum, QbmModel, SystemLayout};
use crate::{Error, Result};

/// Relative energy variance above which thermalization is flagged as doubtful.
pub const VARIANCE_FLAG_THRESHOLD: f64 = 0.5;

/// Fraction of the thermometer's spectral range kept clear of its edges when
/// a measured energy has to be pulled back inside.
const THERMOMETER_EDGE_MARGIN: f64 = 1e-3;

/// `|+⟩^⊗n`.
pub fn plus_state(n: usize) -> Vec<Complex64> {
    let d = 1usize << n;
    vec![Complex64::new((d as f64).powf(-0.5), 0.0); d]
}

/// Named observables measured together.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSet {
    names: Vec<String>,
    ops: Vec<PauliSum>,
}

impl ObservableSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, op: PauliSum) {
        self.names.push(name.into());
        self.ops.push(op);
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ops(&self) -> &[PauliSum] {
        &self.ops
    }
}

/// State after a quench: pure unless a channel was applied.
#[derive(Clone, Debug)]
pub enum QuenchState {
    Pure(Vec<Complex64>),
    Mixed(DensityState),
}

impl QuenchState {
    pub fn expectation(&self, pauli: &PauliString) -> f64 {
        match self {
            QuenchState::Pure(psi) => pauli.expectation(psi),
            QuenchState::Mixed(rho) => rho.expectation(pauli),
        }
    }

    pub fn expectation_sum(&self, sum: &PauliSum) -> f64 {
        sum.terms().iter().map(|(c, p)| c * self.expectation(p)).sum()
    }

    /// Measured value of `sum`: each Pauli term is estimated from `shots`
    /// samples when given.
    pub fn measure<R: Rng + ?Sized>(&self, sum: &PauliSum, shots: Option<u64>, rng: &mut R) -> f64 {
        sum.terms()
            .iter()
            .map(|(c, p)| {
                let m = self.expectation(p);
                let m = match shots {
                    Some(nu) if !p.is_identity() => shot_noise(m, 1.0, nu, rng),
                    _ => m,
                };
                c * m
            })
            .sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            QuenchState::Pure(psi) => psi.iter().map(|a| a.norm_sqr()).collect(),
            QuenchState::Mixed(rho) => rho.populations(),
        }
    }
}

/// Inverse temperature read off the thermometer block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermometerReading {
    pub energy: f64,
    pub beta: f64,
    /// The measured energy lay outside the open spectral interval and was
    /// pulled back inside before inversion.
    pub clamped: bool,
}

/// Relative energy variance of a state with its verdict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyVarianceDiagnostic {
    pub mean: f64,
    pub variance: f64,
    /// `(⟨H²⟩ − ⟨H⟩²)/⟨H⟩²`; infinite when `⟨H⟩ = 0`.
    pub relative_variance: f64,
    pub flagged: bool,
}

impl EnergyVarianceDiagnostic {
    fn from_moments(mean: f64, variance: f64) -> Self {
        let relative_variance =
            if mean == 0.0 { f64::INFINITY } else { variance / (mean * mean) };
        Self {
            mean,
            variance,
            relative_variance,
            flagged: !(relative_variance <= VARIANCE_FLAG_THRESHOLD),
        }
    }
}

/// Energy variance of `state` under `h`, from `H|ψ⟩`.
pub fn energy_variance_diagnostic(
    h: &DenseOperator,
    state: &[Complex64],
) -> Result<EnergyVarianceDiagnostic> {
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("state norm² {norm} is not 1")));
    }
    let hpsi = h.matvec(state)?;
    let mean: f64 = state.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
    let second: f64 = hpsi.iter().map(|b| b.norm_sqr()).sum();
    Ok(EnergyVarianceDiagnostic::from_moments(mean, (second - mean * mean).max(0.0)))
}

/// Closed form for `|+⟩^⊗n` when every term is either X-only or Z-only:
/// X strings contribute their coefficient to the mean, Z strings their
/// squared coefficient to the variance.
pub fn plus_state_variance(h: &PauliSum) -> Result<EnergyVarianceDiagnostic> {
    let simplified = h.simplified();
    let (mut mean, mut variance) = (0.0, 0.0);
    for &(c, p) in simplified.terms() {
        if p.is_identity() || p.z_mask() == 0 {
            mean += c;
        } else if p.x_mask() == 0 {
            variance += c * c;
        } else {
            return Err(Error::InvalidArgument(format!(
                "term {} mixes X and Z",
                p.label(h.n_qubits())
            )));
        }
    }
    Ok(EnergyVarianceDiagnostic::from_moments(mean, variance))
}

/// Time-averaged results of a quench.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchEstimate {
    pub times: Vec<f64>,
    pub observables: BTreeMap<String, f64>,
    /// Same values in the order of the requested [`ObservableSet`].
    #[serde(skip)]
    pub values: Vec<f64>,
    /// `None` without a thermometer.
    pub beta_therm: Option<f64>,
    pub thermometer: Option<ThermometerReading>,
    /// From the initial energy on the full spectrum; `None` if it cannot be inverted.
    pub beta_full: Option<f64>,
    pub energy_rel_variance: f64,
    /// Largest `|⟨O⟩(t) − mean|` seen over observables and times.
    pub max_fluctuation: f64,
}

/// Full QBM + thermometer system diagonalized once for repeated quenches.
#[derive(Clone, Debug)]
pub struct QuenchSystem {
    layout: SystemLayout,
    terms: HamiltonianTerms,
    eigsys: EigenSystem,
    coeffs: Vec<Complex64>,
    e_init: f64,
    thermometer_spectrum: Vec<f64>,
}

impl QuenchSystem {
    pub fn new(model: &QbmModel) -> Result<Self> {
        Self::from_terms(model.layout, HamiltonianTerms::from_model(model)?)
    }

    pub fn from_terms(layout: SystemLayout, terms: HamiltonianTerms) -> Result<Self> {
        let total = terms.total();
        let eigsys = eig_hermitian(&total.to_dense())?;
        let plus = plus_state(layout.n());
        let coeffs = eigsys.project(&plus)?;
        let e_init = total.expectation(&plus);
        let thermometer_local = terms.thermometer_local(&layout);
        let thermometer_spectrum = if layout.has_thermometer() {
            eig_hermitian(&thermometer_local.to_dense())?.eigenvalues().to_vec()
        } else {
            Vec::new()
        };
        Ok(Self { layout, terms, eigsys, coeffs, e_init, thermometer_spectrum })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn terms(&self) -> &HamiltonianTerms {
        &self.terms
    }

    pub fn eigsys(&self) -> &EigenSystem {
        &self.eigsys
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `⟨+|H|+⟩`.
    pub fn initial_energy(&self) -> f64 {
        self.e_init
    }

    pub fn thermometer_spectrum(&self) -> &[f64] {
        &self.thermometer_spectrum
    }

    /// Relative energy variance of `|+⟩^⊗n` from the energy-basis weights.
    pub fn energy_rel_variance(&self) -> f64 {
        let second: f64 = self
            .coeffs
            .iter()
            .zip(self.eigsys.eigenvalues())
            .map(|(c, e)| c.norm_sqr() * e * e)
            .sum();
        let var = (second - self.e_init * self.e_init).max(0.0);
        if self.e_init == 0.0 {
            f64::INFINITY
        } else {
            var / (self.e_init * self.e_init)
        }
    }

    /// Inverse temperature matching the initial energy on the full spectrum.
    pub fn beta_full(&self) -> Result<f64> {
        invert_beta(self.eigsys.eigenvalues(), self.e_init)
    }

    /// Invert a measured thermometer energy against the thermometer spectrum.
    pub fn read_thermometer(&self, energy: f64) -> Result<ThermometerReading> {
        let spec = &self.thermometer_spectrum;
        if spec.is_empty() {
            return Err(Error::InvalidArgument("layout has no thermometer".into()));
        }
        let (min, max) = (spec[0], spec[spec.len() - 1]);
        let margin = THERMOMETER_EDGE_MARGIN * (max - min);
        let target = energy.clamp(min + margin, max - margin);
        let clamped = target != energy;
        if clamped {
            log::debug!("thermometer energy {energy} pulled into ({min}, {max})");
        }
        Ok(ThermometerReading { energy, beta: invert_beta(spec, target)?, clamped })
    }

    /// State at time `t`, passed through the channels of `noise` if enabled.
    pub fn state_at<R: Rng + ?Sized>(
        &self,
        t: f64,
        noise: Option<&NoiseConfig>,
        rng: &mut R,
    ) -> Result<QuenchState> {
        let psi = self.eigsys.evolve_coefficients(&self.coeffs, t)?;
        match noise {
            Some(cfg) if cfg.channels_enabled() => {
                let mut rho = DensityState::from_pure(&psi)?;
                apply_channels(&mut rho, cfg, rng)?;
                Ok(QuenchState::Mixed(rho))
            }
            _ => Ok(QuenchState::Pure(psi)),
        }
    }

    /// Infinite-time average `Σ_{E_i = E_j} c_i^* c_j ⟨E_i|O|E_j⟩`; exactly
    /// degenerate levels keep their cross terms.
    pub fn long_time_average(&self, op: &PauliSum) -> Result<f64> {
        let values = self.eigsys.eigenvalues();
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-10 * scale;
        let nondegenerate = values.windows(2).all(|w| w[1] - w[0] > tol);
        if nondegenerate {
            let per_state = eigenstate_expectations(op, &self.eigsys)?;
            return Ok(diagonal_ensemble_average(&self.coeffs, &per_state));
        }
        let mut total = 0.0;
        let mut start = 0;
        while start < values.len() {
            let mut end = start + 1;
            while end < values.len() && values[end] - values[end - 1] <= tol {
                end += 1;
            }
            // Project |ψ0⟩ onto the block, then take the expectation there.
            let mut block = vec![Complex64::new(0.0, 0.0); self.eigsys.dim()];
            for k in start..end {
                for (b, v) in block.iter_mut().zip(self.eigsys.vector(k)) {
                    *b += self.coeffs[k] * v;
                }
            }
            total += op.expectation(&block);
            start = end;
        }
        Ok(total)
    }

    /// Born distribution of the visible sites averaged over `times`
    /// (index bit `υ` set means `z_υ = −1`).
    pub fn visible_distribution<R: Rng + ?Sized>(
        &self,
        times: &[f64],
        noise: Option<&NoiseConfig>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("no quench times".into()));
        }
        let nv = self.layout.n_visible;
        let mask = (1usize << nv) - 1;
        let mut table = vec![0.0; 1 << nv];
        for &t in times {
            for (i, p) in self.state_at(t, noise, rng)?.populations().iter().enumerate() {
                table[i & mask] += p;
            }
        }
        let total: f64 = table.iter().sum();
        table.iter_mut().for_each(|p| *p /= total);
        Ok(table)
    }
}

/// Quench `|+⟩^⊗n` to each time, average the observables uniformly over
/// the times and read the thermometer.
pub fn quench_sample<R: Rng + ?Sized>(
    system: &QuenchSystem,
    observables: &ObservableSet,
    times: &[f64],
    noise: Option<&NoiseConfig>,
    rng: &mut R,
) -> Result<QuenchEstimate> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("quench needs at least one time".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("quench time {t} is invalid")));
    }
    if let Some(cfg) = noise {
        cfg.validate()?;
    }
    let n = system.layout.n();
    for op in observables.ops() {
        if op.n_qubits() != n {
            return Err(Error::DimensionMismatch { expected: n, got: op.n_qubits() });
        }
    }
    let shots = noise.and_then(|c| c.shots);
    let has_therm = system.layout.has_thermometer();
    let therm_full = &system.terms.thermometer;

    let mut traces = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut therm_energy = 0.0;
    for &t in times {
        let state = system.state_at(t, noise, rng)?;
        for (trace, op) in traces.iter_mut().zip(observables.ops()) {
            trace.push(state.measure(op, shots, rng));
        }
        if has_therm {
            therm_energy += state.measure(therm_full, shots, rng);
        }
    }
    let count = times.len() as f64;
    let mut values = Vec::with_capacity(observables.len());
    let mut max_fluctuation = 0.0f64;
    for trace in &traces {
        let mean = trace.iter().sum::<f64>() / count;
        max_fluctuation = trace.iter().fold(max_fluctuation, |m, v| m.max((v - mean).abs()));
        values.push(mean);
    }
    let thermometer = if has_therm {
        let reading = system.read_thermometer(therm_energy / count)?;
        if reading.clamped {
            log::warn!(
                "thermometer energy {:.6} outside its spectrum; beta estimate clamped",
                reading.energy
            );
        }
        Some(reading)
    } else {
        None
    };
    let beta_full = system.beta_full().ok();
    Ok(QuenchEstimate {
        times: times.to_vec(),
        observables: observables.names().iter().cloned().zip(values.iter().copied()).collect(),
        values,
        beta_therm: thermometer.map(|r| r.beta),
        thermometer,
        beta_full,
        energy_rel_variance: system.energy_rel_variance(),
        max_fluctuation,
    })
}
