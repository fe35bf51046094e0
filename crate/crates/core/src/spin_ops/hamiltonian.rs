use super::layout::{ModelSpec, SystemLayout};
use super::operator::DenseOperator;
use super::params::{QbmModel, QbmParameters};
use super::pauli::{PauliString, PauliSum};
use crate::{Error, Result};

/// The three Hamiltonian blocks as Pauli sums on the full register.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerms {
    pub qbm: PauliSum,
    pub thermometer: PauliSum,
    pub interaction: PauliSum,
}

impl HamiltonianTerms {
    pub fn build(layout: &SystemLayout, spec: &ModelSpec, params: &QbmParameters) -> Result<Self> {
        layout.validate()?;
        spec.validate(layout)?;
        params.validate(layout, spec)?;
        let n = layout.n();
        let xx = spec.family.has_xx_coupling();

        let local = |sites: std::ops::Range<usize>,
                     edges: &[super::layout::Edge],
                     weights: &[f64]|
         -> Result<PauliSum> {
            let mut sum = PauliSum::new(n);
            for s in sites {
                sum.push(params.gamma[s], PauliString::x(s))?;
                sum.push(params.bias[s], PauliString::z(s))?;
            }
            for (e, &w) in edges.iter().zip(weights) {
                sum.push(w, PauliString::zz(e.0, e.1))?;
                if xx {
                    sum.push(w, PauliString::xx(e.0, e.1))?;
                }
            }
            Ok(sum)
        };
        let qbm = local(layout.qbm_sites(), &spec.qbm_edges, &params.weights)?;
        let thermometer =
            local(layout.thermometer_sites(), &spec.thermometer_edges, &params.thermometer_weights)?;
        let mut interaction = PauliSum::new(n);
        for (e, &w) in spec.interaction_edges.iter().zip(&params.interaction) {
            interaction.push(w, PauliString::zz(e.0, e.1))?;
        }
        Ok(Self { qbm, thermometer, interaction })
    }

    pub fn from_model(model: &QbmModel) -> Result<Self> {
        Self::build(&model.layout, &model.spec, &model.params)
    }

    pub fn total(&self) -> PauliSum {
        let mut sum = self.qbm.clone();
        sum.extend(&self.thermometer).expect("blocks share a register");
        sum.extend(&self.interaction).expect("blocks share a register");
        sum
    }

    /// The QBM block restricted to the QBM register (sites `0..n_qbm`).
    pub fn qbm_local(&self, layout: &SystemLayout) -> PauliSum {
        PauliSum::from_terms(layout.n_qbm(), self.qbm.terms().to_vec())
            .expect("QBM terms live on QBM sites")
    }

    /// The thermometer block relabelled onto its own register.
    pub fn thermometer_local(&self, layout: &SystemLayout) -> PauliSum {
        let shift = layout.n_qbm();
        let terms = self.thermometer.terms().iter().map(|&(c, p)| (c, p.shifted_down(shift))).collect();
        PauliSum::from_terms(layout.n_thermometer, terms)
            .expect("thermometer terms live on thermometer sites")
    }

    pub fn to_dense(&self) -> HamiltonianBlocks {
        HamiltonianBlocks {
            qbm: self.qbm.to_dense(),
            thermometer: self.thermometer.to_dense(),
            interaction: self.interaction.to_dense(),
        }
    }
}

/// Dense versions of the three blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianBlocks {
    pub qbm: DenseOperator,
    pub thermometer: DenseOperator,
    pub interaction: DenseOperator,
}

impl HamiltonianBlocks {
    pub fn total(&self) -> DenseOperator {
        self.qbm
            .add(&self.thermometer)
            .and_then(|h| h.add(&self.interaction))
            .expect("blocks share a register")
    }
}

/// `H = H_QBM + H_therm + H_int`, with the blocks available separately.
pub fn build_hamiltonian(
    layout: &SystemLayout,
    spec: &ModelSpec,
    params: &QbmParameters,
) -> Result<HamiltonianBlocks> {
    Ok(HamiltonianTerms::build(layout, spec, params)?.to_dense())
}

/// Restrict `sum` to the subspace where the first `z_v.len()` sites are fixed
/// to `z_v`. Returns the operator on the remaining sites (relabelled from 0)
/// and the scalar energy offset.
pub fn clamp_visible(sum: &PauliSum, z_v: &[f64]) -> Result<(PauliSum, f64)> {
    let n_v = z_v.len();
    if n_v > sum.n_qubits() {
        return Err(Error::DimensionMismatch { expected: sum.n_qubits(), got: n_v });
    }
    if let Some(z) = z_v.iter().find(|z| **z != 1.0 && **z != -1.0) {
        return Err(Error::InvalidArgument(format!("clamped spin {z} is not ±1")));
    }
    let vmask: u64 = (1u64 << n_v) - 1;
    let mut offset = 0.0;
    let mut reduced = PauliSum::new(sum.n_qubits() - n_v);
    for &(c, p) in sum.terms() {
        if p.x_mask() & vmask != 0 {
            continue;
        }
        let mut coeff = c;
        let mut zbits = p.z_mask() & vmask;
        while zbits != 0 {
            let site = zbits.trailing_zeros() as usize;
            coeff *= z_v[site];
            zbits &= zbits - 1;
        }
        let rest = PauliString::from_masks(p.x_mask() & !vmask, p.z_mask() & !vmask);
        if rest.is_identity() {
            offset += coeff;
        } else {
            reduced.push(coeff, rest.shifted_down(n_v))?;
        }
    }
    Ok((reduced, offset))
}

/// Visible assignment for bitstring index `k`: bit `υ` set means `z_υ = -1`.
pub fn visible_assignment(k: usize, n_visible: usize) -> Vec<f64> {
    (0..n_visible).map(|v| if (k >> v) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Clamped (positive-phase) Hamiltonian on the hidden and thermometer sites,
/// plus the scalar offset contributed by the fixed visible spins.
pub fn build_clamped_hamiltonian(
    layout: &SystemLayout,
    spec: &ModelSpec,
    params: &QbmParameters,
    z_v: &[f64],
) -> Result<(DenseOperator, f64)> {
    if z_v.len() != layout.n_visible {
        return Err(Error::DimensionMismatch { expected: layout.n_visible, got: z_v.len() });
    }
    let terms = HamiltonianTerms::build(layout, spec, params)?;
    let (reduced, offset) = clamp_visible(&terms.total(), z_v)?;
    Ok((reduced.to_dense(), offset))
}

/// Observables conjugate to the trainable parameters, in the order of
/// `QbmParameters::trainable`: `σ^z_i` for each QBM site, then one coupling
/// operator per QBM edge (`σ^zσ^z`, plus `σ^xσ^x` for the XX family).
pub fn trainable_observables(layout: &SystemLayout, spec: &ModelSpec) -> Vec<PauliSum> {
    let n = layout.n();
    let mut out = Vec::with_capacity(spec.trainable_count(layout));
    for s in layout.qbm_sites() {
        out.push(PauliSum::single(n, 1.0, PauliString::z(s)).expect("site in range"));
    }
    for e in &spec.qbm_edges {
        let mut sum = PauliSum::single(n, 1.0, PauliString::zz(e.0, e.1)).expect("edge in range");
        if spec.family.has_xx_coupling() {
            sum.push(1.0, PauliString::xx(e.0, e.1)).expect("edge in range");
        }
        out.push(sum);
    }
    out
}
