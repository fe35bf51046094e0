//! Pauli operators, Hamiltonian families and clamped Hamiltonians.

mod hamiltonian;
mod layout;
mod operator;
mod params;
mod pauli;

pub use hamiltonian::{
    build_clamped_hamiltonian, build_hamiltonian, clamp_visible, trainable_observables,
    visible_assignment, HamiltonianBlocks, HamiltonianTerms,
};
pub use layout::{Edge, Family, InteractionShape, ModelSpec, Role, SystemLayout, MAX_QUBITS};
pub use operator::{DenseOperator, HERMITIAN_TOLERANCE};
pub use params::{
    init_parameters, visible_bias_logit, InitConfig, ModelDocument, QbmModel, QbmParameters,
};
pub use pauli::{Axis, PauliString, PauliSum};

use crate::{Error, Result};

/// Single-site Pauli `σ^axis_site` on an `n`-qubit register.
pub fn build_pauli(site: usize, axis: Axis, n: usize) -> Result<DenseOperator> {
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
    }
    if site >= n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    Ok(PauliSum::single(n, 1.0, PauliString::single(site, axis))?.to_dense())
}

#[cfg(test)]
mod tests;
