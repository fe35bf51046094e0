//! Exact desk-scale simulation and training of quantum Boltzmann machines
//! whose negative phase is sampled through quench dynamics.
//!
//! The crate is organised around the pipeline used in the experiments:
//!
//! - [`spin_ops`]: Pauli algebra, system layouts, the three Hamiltonian
//!   families and clamped (positive-phase) Hamiltonians.
//! - [`spectral`]: Hermitian eigendecomposition, unitary evolution and
//!   level-spacing statistics with Berry–Robnik fits.
//! - [`thermal`]: Gibbs and microcanonical ensembles, inverse-temperature
//!   inversion and the quench sampler with its thermometer.
//! - [`noise`]: amplitude-damping / dephasing channels and shot noise.
//! - [`train`]: loss functions, gradient assembly and the training loop.
//! - [`rbm`]: the classical restricted Boltzmann machine baseline.
//! - [`eval`]: Bernoulli-mixture data, model distributions, KL and AIC.
//! - [`harness`]: experiment orchestration and result files.

pub mod error;
pub mod eval;
pub mod harness;
pub mod noise;
pub mod optim;
pub mod rbm;
pub mod spectral;
pub mod spin_ops;
pub mod thermal;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
