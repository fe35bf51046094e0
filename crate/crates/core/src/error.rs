use thiserror::Error;

use crate::spin_ops::Family;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} is out of range for a {n}-qubit register")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("{n} qubits exceeds the dense simulation cap of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("edge ({0}, {1}) is not allowed for the {2:?} family")]
    InvalidEdge(usize, usize, Family),

    #[error("parameters do not match the model: {0}")]
    ParameterMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no eigenvalues inside the energy window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("target energy {target} lies outside the open spectral interval ({min}, {max})")]
    EnergyOutOfRange { target: f64, min: f64, max: f64 },

    #[error("spacing sample is degenerate: {0}")]
    DegenerateSample(String),

    #[error("gradient contains non-finite entries at {0:?}")]
    NonFiniteGradient(Vec<usize>),

    #[error("probability table is not normalized (sum = {0})")]
    Unnormalized(f64),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("training aborted in epoch {epoch}: {source}")]
    TrainingAborted {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
