//! Amplitude-damping and dephasing channels on density matrices, and
//! Gaussian shot noise for finite-sample observable estimates.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::spectral::EigenSystem;
use crate::spin_ops::{PauliString, PauliSum};
use crate::thermal::TimeWindow;
use crate::{Error, Result};

/// Single-qubit operator, row-major.
pub type Mat2 = [Complex64; 4];

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

const IDENTITY: Mat2 = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(0.0, 0.0),
    Complex64::new(1.0, 0.0),
];

/// Coherence times, shot count and channel switches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub t1: f64,
    pub t_phi: f64,
    /// Shots per observable; `None` gives exact expectations.
    pub shots: Option<u64>,
    pub amplitude_damping: bool,
    pub dephasing: bool,
    /// Distribution of channel durations.
    pub channel_time: TimeWindow,
}

impl NoiseConfig {
    /// Reference operating point: `T1 = T_φ = 75`, 1000 shots, both channels.
    pub fn reference() -> Self {
        Self::with_coherence_time(75.0)
    }

    pub fn with_coherence_time(t: f64) -> Self {
        Self {
            t1: t,
            t_phi: t,
            shots: Some(1000),
            amplitude_damping: true,
            dephasing: true,
            channel_time: TimeWindow::default(),
        }
    }

    /// Shot noise only; the state stays pure.
    pub fn shots_only(shots: u64) -> Self {
        Self { amplitude_damping: false, dephasing: false, ..Self::with_coherence_time(75.0) }
            .with_shots(Some(shots))
    }

    pub fn noiseless() -> Self {
        Self { shots: None, ..Self::shots_only(1) }
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    pub fn channels_enabled(&self) -> bool {
        self.amplitude_damping || self.dephasing
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t_phi > 0.0) || !self.t1.is_finite() || !self.t_phi.is_finite()
        {
            return Err(Error::InvalidArgument("coherence times must be positive".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shot count must be at least 1".into()));
        }
        self.channel_time.validate()
    }
}

/// Amplitude damping over duration `t`:
/// `E1 = diag(1, e^{-t/2T1})`, `E2 = [[0, √(1−e^{−t/T1})], [0, 0]]`.
pub fn amplitude_damping_kraus(t: f64, t1: f64) -> [Mat2; 2] {
    let zero = re(0.0);
    [
        [re(1.0), zero, zero, re((-t / (2.0 * t1)).exp())],
        [zero, re((1.0 - (-t / t1).exp()).max(0.0).sqrt()), zero, zero],
    ]
}

/// Dephasing over duration `t`:
/// `E1 = diag(1, e^{-t/T_φ})`, `E2 = diag(0, √(1−e^{−2t/T_φ}))`.
pub fn dephasing_kraus(t: f64, t_phi: f64) -> [Mat2; 2] {
    let zero = re(0.0);
    [
        [re(1.0), zero, zero, re((-t / t_phi).exp())],
        [zero, zero, zero, re((1.0 - (-2.0 * t / t_phi).exp()).max(0.0).sqrt())],
    ]
}

/// `Σ_k E_k† E_k`, which is the identity for a trace-preserving channel.
pub fn kraus_completeness(kraus: &[Mat2]) -> Mat2 {
    let mut out = [re(0.0); 4];
    for e in kraus {
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    out[r * 2 + c] += e[k * 2 + r].conj() * e[k * 2 + c];
                }
            }
        }
    }
    out
}

/// Choi matrix `Σ_k vec(E_k) vec(E_k)†` (4×4, row-major).
pub fn choi_matrix(kraus: &[Mat2]) -> [Complex64; 16] {
    let mut out = [re(0.0); 16];
    for e in kraus {
        // vec stacks |i⟩⊗E|i⟩ for i = 0, 1.
        let v = [e[0], e[2], e[1], e[3]];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] += v[r] * v[c].conj();
            }
        }
    }
    out
}

/// A density matrix on `n` qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityState {
    pub fn from_pure(state: &[Complex64]) -> Result<Self> {
        let d = state.len();
        if !d.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("state length {d} is not a power of two")));
        }
        let mut data = vec![re(0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = state[r] * state[c].conj();
            }
        }
        Ok(Self { n_qubits: d.trailing_zeros() as usize, data })
    }

    pub fn from_row_major(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let d = 1usize << n_qubits;
        if data.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: data.len() });
        }
        Ok(Self { n_qubits, data })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let mut data = vec![re(0.0); d * d];
        for i in 0..d {
            data[i * d + i] = re(1.0 / d as f64);
        }
        Self { n_qubits, data }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        worst
    }

    /// Computational-basis populations.
    pub fn populations(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i].re).collect()
    }

    pub fn expectation(&self, pauli: &PauliString) -> f64 {
        pauli.expectation_density(&self.data, self.dim())
    }

    pub fn expectation_sum(&self, sum: &PauliSum) -> f64 {
        sum.expectation_density(&self.data)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let op = crate::spin_ops::DenseOperator::from_row_major(self.n_qubits, self.data.clone())?;
        Ok(crate::spectral::eig_hermitian(&op)?.ground_energy())
    }

    /// `ρ ↦ Σ_k E_k ρ E_k†` with each `E_k` acting on `site`.
    pub fn apply_single_site(&mut self, site: usize, kraus: &[Mat2]) -> Result<()> {
        self.apply_superoperator(site, &superoperator(kraus))
    }

    /// Apply a single-site map given as its superoperator on the 2×2 block
    /// `(b00, b01, b10, b11)` of `site`.
    pub fn apply_superoperator(&mut self, site: usize, s: &SuperOp) -> Result<()> {
        if site >= self.n_qubits {
            return Err(Error::SiteOutOfRange { site, n: self.n_qubits });
        }
        let mut terms = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
        for (i, row) in s.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != re(0.0) {
                    terms[i / 2][i % 2].push((j, *v));
                }
            }
        }
        let d = self.dim();
        let bit = 1usize << site;
        for r0 in (0..d).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for c0 in (0..d).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let idx = [r0 * d + c0, r0 * d + c1, r1 * d + c0, r1 * d + c1];
                let b = idx.map(|k| self.data[k]);
                for (k, t) in idx.iter().zip(terms.iter().flatten()) {
                    self.data[*k] = t.iter().fold(re(0.0), |acc, (j, v)| acc + v * b[*j]);
                }
            }
        }
        Ok(())
    }
}

/// Superoperator of a single-site channel on the row-major 2×2 block.
pub type SuperOp = [[Complex64; 4]; 4];

/// `S[(r,c)][(a,b)] = Σ_k E_k[r,a] conj(E_k[c,b])`.
pub fn superoperator(kraus: &[Mat2]) -> SuperOp {
    let mut s = [[re(0.0); 4]; 4];
    for e in kraus {
        for (i, row) in s.iter_mut().enumerate() {
            let (r, c) = (i / 2, i % 2);
            for (j, v) in row.iter_mut().enumerate() {
                let (a, b) = (j / 2, j % 2);
                *v += e[2 * r + a] * e[2 * c + b].conj();
            }
        }
    }
    s
}

/// `second ∘ first`.
pub fn compose(second: &SuperOp, first: &SuperOp) -> SuperOp {
    let mut out = [[re(0.0); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..4).fold(re(0.0), |acc, k| acc + second[i][k] * first[k][j]);
        }
    }
    out
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("channel time {t} is negative")));
    }
    Ok(())
}

pub fn apply_amplitude_damping(
    rho: &DensityState,
    t: f64,
    t1: f64,
    site: usize,
) -> Result<DensityState> {
    check_time(t)?;
    let mut out = rho.clone();
    out.apply_single_site(site, &amplitude_damping_kraus(t, t1))?;
    Ok(out)
}

pub fn apply_dephasing(
    rho: &DensityState,
    t: f64,
    t_phi: f64,
    site: usize,
) -> Result<DensityState> {
    check_time(t)?;
    let mut out = rho.clone();
    out.apply_single_site(site, &dephasing_kraus(t, t_phi))?;
    Ok(out)
}

/// Apply every enabled channel once to every qubit, each with its own
/// duration drawn from `config.channel_time`.
pub fn apply_channels<R: Rng + ?Sized>(
    rho: &mut DensityState,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<()> {
    for site in 0..rho.n_qubits() {
        let mut map = superoperator(&[IDENTITY]);
        if config.amplitude_damping {
            let t = config.channel_time.sample(rng);
            map = superoperator(&amplitude_damping_kraus(t, config.t1));
        }
        if config.dephasing {
            let t = config.channel_time.sample(rng);
            map = compose(&superoperator(&dephasing_kraus(t, config.t_phi)), &map);
        }
        if config.amplitude_damping || config.dephasing {
            rho.apply_superoperator(site, &map)?;
        }
    }
    Ok(())
}

/// `|+⟩^⊗n` evolved for `t_evolve`, then passed through the enabled channels.
pub fn noisy_quench_state<R: Rng + ?Sized>(
    eigsys: &EigenSystem,
    t_evolve: f64,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<DensityState> {
    config.validate()?;
    let d = eigsys.dim();
    let plus = vec![re((d as f64).powf(-0.5)); d];
    let psi = crate::spectral::evolve(&plus, eigsys, t_evolve)?;
    let mut rho = DensityState::from_pure(&psi)?;
    apply_channels(&mut rho, config, rng)?;
    Ok(rho)
}

/// `mean + N(0, (second_moment − mean²)/shots)`; a slightly negative
/// variance from rounding is treated as zero.
pub fn shot_noise<R: Rng + ?Sized>(mean: f64, second_moment: f64, shots: u64, rng: &mut R) -> f64 {
    let variance = (second_moment - mean * mean).max(0.0) / shots as f64;
    if variance == 0.0 {
        return mean;
    }
    let z: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * z
}
