//! Pauli strings stored as X/Z bit masks.
//!
//! Site `k` corresponds to bit `k` of a computational-basis index, and a
//! cleared bit is the `σ^z = +1` state. A string acts on basis state `|i⟩` as
//! `P|i⟩ = i^{#Y} (-1)^{popcount(i & z)} |i ^ x⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::DenseOperator;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    x: u64,
    z: u64,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn from_masks(x: u64, z: u64) -> Self {
        Self { x, z }
    }

    pub fn single(site: usize, axis: Axis) -> Self {
        let bit = 1u64 << site;
        match axis {
            Axis::X => Self { x: bit, z: 0 },
            Axis::Y => Self { x: bit, z: bit },
            Axis::Z => Self { x: 0, z: bit },
        }
    }

    pub fn z(site: usize) -> Self {
        Self::single(site, Axis::Z)
    }

    pub fn x(site: usize) -> Self {
        Self::single(site, Axis::X)
    }

    pub fn zz(a: usize, b: usize) -> Self {
        Self { x: 0, z: (1 << a) | (1 << b) }
    }

    pub fn xx(a: usize, b: usize) -> Self {
        Self { x: (1 << a) | (1 << b), z: 0 }
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Highest site touched plus one.
    pub fn span(&self) -> usize {
        64 - self.support().leading_zeros() as usize
    }

    fn y_phase(&self) -> Complex64 {
        match (self.x & self.z).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Image of basis state `index` and the accompanying phase.
    #[inline]
    pub fn apply(&self, index: usize) -> (usize, Complex64) {
        let sign = if (index as u64 & self.z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        (index ^ self.x as usize, self.y_phase() * sign)
    }

    /// Sign of a diagonal string on basis state `index`.
    #[inline]
    pub fn diagonal_sign(&self, index: usize) -> f64 {
        debug_assert!(self.is_diagonal());
        if (index as u64 & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `⟨ψ|P|ψ⟩` for a state vector.
    pub fn expectation(&self, state: &[Complex64]) -> f64 {
        if self.is_diagonal() {
            return state
                .iter()
                .enumerate()
                .map(|(i, a)| self.diagonal_sign(i) * a.norm_sqr())
                .sum();
        }
        let phase = self.y_phase();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in state.iter().enumerate() {
            let sign = self.diagonal_sign_unchecked(i);
            acc += state[i ^ self.x as usize].conj() * *a * sign;
        }
        (acc * phase).re
    }

    /// `tr(P ρ)` for a row-major density matrix of dimension `dim`.
    pub fn expectation_density(&self, rho: &[Complex64], dim: usize) -> f64 {
        let phase = self.y_phase();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            let j = i ^ self.x as usize;
            acc += rho[i * dim + j] * self.diagonal_sign_unchecked(i);
        }
        (acc * phase).re
    }

    #[inline]
    fn diagonal_sign_unchecked(&self, index: usize) -> f64 {
        if (index as u64 & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Shift every site down by `offset`; bits below `offset` must be clear.
    pub fn shifted_down(&self, offset: usize) -> Self {
        Self { x: self.x >> offset, z: self.z >> offset }
    }

    pub fn shifted_up(&self, offset: usize) -> Self {
        Self { x: self.x << offset, z: self.z << offset }
    }

    pub fn label(&self, n: usize) -> String {
        (0..n)
            .map(|k| match ((self.x >> k) & 1, (self.z >> k) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            })
            .collect()
    }
}

/// A real linear combination of Pauli strings (always Hermitian).
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut sum = Self::new(n_qubits);
        for (c, p) in terms {
            sum.push(c, p)?;
        }
        Ok(sum)
    }

    pub fn single(n_qubits: usize, coeff: f64, pauli: PauliString) -> Result<Self> {
        Self::from_terms(n_qubits, vec![(coeff, pauli)])
    }

    pub fn push(&mut self, coeff: f64, pauli: PauliString) -> Result<()> {
        if pauli.span() > self.n_qubits {
            return Err(Error::SiteOutOfRange { site: pauli.span() - 1, n: self.n_qubits });
        }
        self.terms.push((coeff, pauli));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.is_diagonal())
    }

    pub fn extend(&mut self, other: &PauliSum) -> Result<()> {
        for &(c, p) in &other.terms {
            self.push(c, p)?;
        }
        Ok(())
    }

    /// Re-declare the register width; fails if a term would fall outside.
    pub fn with_n_qubits(&self, n_qubits: usize) -> Result<Self> {
        Self::from_terms(n_qubits, self.terms.clone())
    }

    /// Merge duplicate strings and drop exact zeros; terms end up sorted.
    pub fn simplified(&self) -> Self {
        let mut map = std::collections::BTreeMap::<PauliString, f64>::new();
        for &(c, p) in &self.terms {
            *map.entry(p).or_insert(0.0) += c;
        }
        let terms = map.into_iter().filter(|(_, c)| *c != 0.0).map(|(p, c)| (c, p)).collect();
        Self { n_qubits: self.n_qubits, terms }
    }

    pub fn expectation(&self, state: &[Complex64]) -> f64 {
        self.terms.iter().map(|(c, p)| c * p.expectation(state)).sum()
    }

    pub fn expectation_density(&self, rho: &[Complex64]) -> f64 {
        let dim = self.dim();
        self.terms.iter().map(|(c, p)| c * p.expectation_density(rho, dim)).sum()
    }

    /// Diagonal of the operator in the computational basis (diagonal terms only).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.dim()];
        for &(c, p) in self.terms.iter().filter(|(_, p)| p.is_diagonal()) {
            for (i, d) in diag.iter_mut().enumerate() {
                *d += c * p.diagonal_sign(i);
            }
        }
        diag
    }

    /// `H|ψ⟩` without forming the matrix.
    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
        for &(c, p) in &self.terms {
            for (i, a) in state.iter().enumerate() {
                let (j, phase) = p.apply(i);
                out[j] += phase * *a * c;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseOperator {
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for &(c, p) in &self.terms {
            for col in 0..dim {
                let (row, phase) = p.apply(col);
                data[row * dim + col] += phase * c;
            }
        }
        DenseOperator::from_hermitian_parts(self.n_qubits, data)
    }
}
