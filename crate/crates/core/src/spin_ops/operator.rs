use num_complex::Complex64;

use crate::{Error, Result};

/// Entrywise tolerance used for the Hermitian flag.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// A dense `2^n × 2^n` complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_qubits: usize,
    data: Vec<Complex64>,
    hermitian: bool,
}

impl DenseOperator {
    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, data: vec![Complex64::new(0.0, 0.0); dim * dim], hermitian: true }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut op = Self::zeros(n_qubits);
        let dim = op.dim();
        for i in 0..dim {
            op.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        op
    }

    /// Wrap row-major data; the Hermitian flag is computed from the entries.
    pub fn from_row_major(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let mut op = Self { n_qubits, data, hermitian: false };
        op.hermitian = op.hermiticity_error() < HERMITIAN_TOLERANCE;
        Ok(op)
    }

    /// Build from a dimension that must be a power of two.
    pub fn from_dim(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("dimension {dim} is not a power of two")));
        }
        Self::from_row_major(dim.trailing_zeros() as usize, data)
    }

    pub(crate) fn from_hermitian_parts(n_qubits: usize, data: Vec<Complex64>) -> Self {
        Self { n_qubits, data, hermitian: true }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.data[r * dim + c] - self.data[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[c * dim + r] = self.data[r * dim + c].conj();
            }
        }
        Self { n_qubits: self.n_qubits, data, hermitian: self.hermitian }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { n_qubits: self.n_qubits, data, hermitian: self.hermitian && other.hermitian })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n_qubits: self.n_qubits, data, hermitian: self.hermitian && other.hermitian })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            data: self.data.iter().map(|a| a * factor).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            let row = &self.data[r * dim..(r + 1) * dim];
            let out = &mut data[r * dim..(r + 1) * dim];
            for (k, a) in row.iter().enumerate() {
                if *a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let other_row = &other.data[k * dim..(k + 1) * dim];
                for (o, b) in out.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_row_major(self.n_qubits, data)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        Ok((0..dim)
            .map(|r| self.data[r * dim..(r + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `⟨ψ|A|ψ⟩`, real part.
    pub fn expectation(&self, v: &[Complex64]) -> Result<f64> {
        let av = self.matvec(v)?;
        Ok(v.iter().zip(&av).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Kronecker product `self ⊗ other`, where `other` occupies the low bits.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        let dim = da * db;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for ar in 0..da {
            for ac in 0..da {
                let a = self.data[ar * da + ac];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for br in 0..db {
                    for bc in 0..db {
                        data[(ar * db + br) * dim + ac * db + bc] = a * other.data[br * db + bc];
                    }
                }
            }
        }
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            data,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    /// Largest entrywise difference to another operator of the same size.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}
