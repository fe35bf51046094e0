//! Hermitian eigendecomposition, unitary evolution and level-spacing
//! statistics.

mod spacing;

pub use spacing::{
    berry_robnik_cdf, berry_robnik_pdf, fit_berry_robnik, level_spacings,
    level_spacings_from_values, write_spacing_report, BerryRobnikFit, SpacingSample,
    SpacingSidecar, MIN_LEVELS_FOR_FIT,
};

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::spin_ops::DenseOperator;
use crate::{Error, Result};

/// Tolerance on `‖ψ‖ − 1` accepted by [`evolve`].
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Full spectrum and eigenvectors of a Hermitian operator.
///
/// Eigenvalues are ascending; eigenvector `k` is stored contiguously
/// (column-major), so `vector(k)` is a slice.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Vec<Complex64>,
    dim: usize,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn max_energy(&self) -> f64 {
        self.values[self.dim - 1]
    }

    /// Coefficients `c_k = ⟨E_k|ψ⟩`.
    pub fn project(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(state.len())?;
        Ok((0..self.dim)
            .map(|k| {
                self.vector(k)
                    .iter()
                    .zip(state)
                    .fold(Complex64::new(0.0, 0.0), |acc, (v, s)| acc + v.conj() * s)
            })
            .collect())
    }

    /// `Σ_k c_k |E_k⟩`.
    pub fn reconstruct(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (k, c) in coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.vector(k)) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Evolve energy-basis coefficients by time `t` and return the state.
    pub fn evolve_coefficients(&self, coeffs: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let phased: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        self.reconstruct(&phased)
    }

    /// `V diag(f(E)) V†` as a dense operator.
    pub fn function_of(&self, f: impl Fn(f64) -> f64) -> DenseOperator {
        let d = self.dim;
        let weights: Vec<f64> = self.values.iter().map(|&e| f(e)).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for (k, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let v = self.vector(k);
            for r in 0..d {
                let vr = v[r] * w;
                for c in 0..d {
                    data[r * d + c] += vr * v[c].conj();
                }
            }
        }
        DenseOperator::from_dim(d, data).expect("dimension is a power of two")
    }

    /// `V diag(E) V†`.
    pub fn reconstruct_operator(&self) -> DenseOperator {
        self.function_of(|e| e)
    }

    /// Largest `‖H v_k − E_k v_k‖`.
    pub fn residual(&self, h: &DenseOperator) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.dim {
            let hv = h.matvec(self.vector(k))?;
            let r = hv
                .iter()
                .zip(self.vector(k))
                .map(|(a, v)| (a - v * self.values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// Largest entry of `|V†V − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                let dot = self
                    .vector(a)
                    .iter()
                    .zip(self.vector(b))
                    .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y);
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).norm());
            }
        }
        worst
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: len });
        }
        Ok(())
    }
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Real matrices go through the real symmetric solver.
pub fn eig_hermitian(h: &DenseOperator) -> Result<EigenSystem> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(h.hermiticity_error()));
    }
    let d = h.dim();
    let data = h.data();
    let (values, vectors) = if h.is_real() {
        let m = Mat::<f64>::from_fn(d, d, |r, c| data[r * d + c].re);
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
        let s = eig.S();
        let u = eig.U();
        let values: Vec<f64> = (0..d).map(|k| s[k]).collect();
        let mut vectors = Vec::with_capacity(d * d);
        for k in 0..d {
            for r in 0..d {
                vectors.push(Complex64::new(u[(r, k)], 0.0));
            }
        }
        (values, vectors)
    } else {
        let m = Mat::<faer::c64>::from_fn(d, d, |r, c| data[r * d + c]);
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
        let s = eig.S();
        let u = eig.U();
        let values: Vec<f64> = (0..d).map(|k| s[k].re).collect();
        let mut vectors = Vec::with_capacity(d * d);
        for k in 0..d {
            for r in 0..d {
                vectors.push(u[(r, k)]);
            }
        }
        (values, vectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok(EigenSystem { values, vectors, dim: d })
}

/// `V e^{−iEt} V† ψ` for a normalized state.
pub fn evolve(state: &[Complex64], eigsys: &EigenSystem, t: f64) -> Result<Vec<Complex64>> {
    if state.len() != eigsys.dim() {
        return Err(Error::DimensionMismatch { expected: eigsys.dim(), got: state.len() });
    }
    let norm = state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
    }
    let coeffs = eigsys.project(state)?;
    eigsys.evolve_coefficients(&coeffs, t)
}
