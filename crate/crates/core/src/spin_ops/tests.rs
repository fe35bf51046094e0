use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::Error;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Independent 2×2 building blocks for Kronecker-product oracles.
fn mat2(entries: [f64; 4]) -> DenseOperator {
    DenseOperator::from_row_major(1, entries.iter().map(|&v| c(v)).collect()).unwrap()
}

fn sx() -> DenseOperator {
    mat2([0.0, 1.0, 1.0, 0.0])
}

fn sz() -> DenseOperator {
    mat2([1.0, 0.0, 0.0, -1.0])
}

fn id2() -> DenseOperator {
    mat2([1.0, 0.0, 0.0, 1.0])
}

fn pair_layout() -> SystemLayout {
    SystemLayout::new(1, 1, 0).unwrap()
}

fn pair_params(gamma: [f64; 2], bias: [f64; 2], w: f64) -> QbmParameters {
    QbmParameters {
        gamma: gamma.to_vec(),
        bias: bias.to_vec(),
        weights: vec![w],
        thermometer_weights: vec![],
        interaction: vec![],
    }
}

fn random_model(layout: SystemLayout, family: Family, seed: u64) -> QbmModel {
    let spec = ModelSpec::standard(&layout, family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = InitConfig {
        gamma_variance: 0.3,
        bias_variance: 1.0,
        weight_variance: 1.0,
        ..InitConfig::default()
    };
    let means: Vec<f64> = (0..layout.n_visible).map(|k| 0.3 - 0.2 * k as f64).collect();
    let params = init_parameters(&layout, &spec, &means, &cfg, &mut rng).unwrap();
    QbmModel::new(layout, spec, params).unwrap()
}

#[test]
fn single_qubit_z() {
    let z = build_pauli(0, Axis::Z, 1).unwrap();
    assert_eq!(z, sz());
}

#[test]
fn x_on_site_one_of_two_is_antidiagonal_identity_blocks() {
    let x1 = build_pauli(1, Axis::X, 2).unwrap();
    for r in 0..4 {
        for col in 0..4 {
            let want = if (r ^ col) == 2 { 1.0 } else { 0.0 };
            assert_eq!(x1.get(r, col), c(want), "entry ({r},{col})");
        }
    }
    assert_eq!(x1, sx().kron(&id2()));
}

#[test]
fn x_and_z_anticommute_on_three_qubits() {
    let x = build_pauli(0, Axis::X, 3).unwrap();
    let z = build_pauli(0, Axis::Z, 3).unwrap();
    let anti = x.matmul(&z).unwrap().add(&z.matmul(&x).unwrap()).unwrap();
    assert_eq!(anti.max_abs(), 0.0);
}

#[test]
fn paulis_are_hermitian_involutions() {
    for n in 1..=4 {
        for site in 0..n {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let p = build_pauli(site, axis, n).unwrap();
                assert!(p.is_hermitian());
                let sq = p.matmul(&p).unwrap();
                assert_eq!(sq.max_abs_diff(&DenseOperator::identity(n)).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn build_pauli_rejects_bad_arguments() {
    assert!(matches!(build_pauli(3, Axis::X, 3), Err(Error::SiteOutOfRange { .. })));
    assert!(matches!(build_pauli(0, Axis::X, 15), Err(Error::TooManyQubits { .. })));
}

#[test]
fn zero_parameters_give_zero_matrix() {
    let layout = SystemLayout::new(2, 1, 2).unwrap();
    let spec = ModelSpec::standard(&layout, Family::SemiRestrictedTransverseIsing);
    let params = QbmParameters::zeros(&layout, &spec);
    let h = build_hamiltonian(&layout, &spec, &params).unwrap().total();
    assert_eq!(h.max_abs(), 0.0);
}

#[test]
fn restricted_ti_pair_matches_kronecker_assembly() {
    let layout = pair_layout();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let h = build_hamiltonian(&layout, &spec, &pair_params([1.0, 1.0], [0.0, 0.0], 1.0))
        .unwrap()
        .total();
    let oracle = sx()
        .kron(&id2())
        .add(&id2().kron(&sx()))
        .unwrap()
        .add(&sz().kron(&sz()))
        .unwrap();
    assert_abs_diff_eq!(h.max_abs_diff(&oracle).unwrap(), 0.0);
}

#[test]
fn restricted_xx_pair_adds_xx_coupling() {
    let layout = pair_layout();
    let ti = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let xx = ModelSpec::standard(&layout, Family::RestrictedXx);
    let params = pair_params([1.0, 1.0], [0.0, 0.0], 1.0);
    let h_ti = build_hamiltonian(&layout, &ti, &params).unwrap().total();
    let h_xx = build_hamiltonian(&layout, &xx, &params).unwrap().total();
    let diff = h_xx.sub(&h_ti).unwrap();
    assert_abs_diff_eq!(diff.max_abs_diff(&sx().kron(&sx())).unwrap(), 0.0);
}

#[test]
fn mismatched_parameters_are_rejected() {
    let layout = pair_layout();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let mut params = pair_params([1.0, 1.0], [0.0, 0.0], 1.0);
    params.weights.push(0.5);
    assert!(matches!(
        build_hamiltonian(&layout, &spec, &params),
        Err(Error::ParameterMismatch(_))
    ));
    let mut bad = spec.clone();
    bad.qbm_edges.push(Edge(0, 0));
    assert!(build_hamiltonian(&layout, &bad, &QbmParameters::zeros(&layout, &bad)).is_err());
}

#[test]
fn hidden_hidden_edges_are_never_allowed() {
    let layout = SystemLayout::new(1, 2, 0).unwrap();
    for family in Family::ALL {
        let mut spec = ModelSpec::standard(&layout, family);
        spec.qbm_edges.push(Edge(1, 2));
        assert!(matches!(spec.validate(&layout), Err(Error::InvalidEdge(1, 2, _))));
    }
    let layout = SystemLayout::new(2, 1, 0).unwrap();
    let semi = ModelSpec::standard(&layout, Family::SemiRestrictedTransverseIsing);
    assert!(semi.qbm_edges.contains(&Edge(0, 1)));
    let restricted = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    assert!(!restricted.qbm_edges.contains(&Edge(0, 1)));
}

#[test]
fn default_interaction_couples_two_visible_to_two_thermometer_sites() {
    let layout = SystemLayout::new(4, 1, 3).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    assert_eq!(spec.interaction_edges, vec![Edge(0, 5), Edge(0, 6), Edge(1, 5), Edge(1, 6)]);
    let small = SystemLayout::new(1, 1, 1).unwrap();
    let spec = ModelSpec::standard(&small, Family::RestrictedTransverseIsing);
    assert_eq!(spec.interaction_edges, vec![Edge(0, 2)]);
}

#[test]
fn clamped_pair_matches_projection_of_full_matrix() {
    let layout = pair_layout();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let params = pair_params([0.7, 1.3], [0.4, -0.25], 0.9);
    let full = build_hamiltonian(&layout, &spec, &params).unwrap().total();
    let (reduced, offset) =
        build_clamped_hamiltonian(&layout, &spec, &params, &[1.0]).unwrap();
    assert_abs_diff_eq!(offset, 0.4);

    // Visible spin up is bit 0 cleared: basis states 0 and 2.
    let keep = [0usize, 2];
    for (r, &fr) in keep.iter().enumerate() {
        for (col, &fc) in keep.iter().enumerate() {
            let mut want = full.get(fr, fc);
            if r == col {
                want -= offset;
            }
            assert_abs_diff_eq!(reduced.get(r, col).re, want.re, epsilon = 1e-14);
            assert_abs_diff_eq!(reduced.get(r, col).im, want.im, epsilon = 1e-14);
        }
    }
    // Γ_η σ^x + (b_η + w) σ^z
    let oracle = sx().scale(1.3).add(&sz().scale(-0.25 + 0.9)).unwrap();
    assert!(reduced.max_abs_diff(&oracle).unwrap() < 1e-14);
}

#[test]
fn decoupled_clamp_offset_is_visible_bias_energy() {
    let layout = SystemLayout::new(3, 2, 0).unwrap();
    let spec = ModelSpec::standard(&layout, Family::SemiRestrictedTransverseIsing);
    let mut params = QbmParameters::zeros(&layout, &spec);
    params.gamma = vec![0.5, 0.6, 0.7, 0.8, 0.9];
    params.bias = vec![0.1, -0.2, 0.3, 0.4, -0.5];
    let z = [1.0, -1.0, -1.0];
    let (reduced, offset) = build_clamped_hamiltonian(&layout, &spec, &params, &z).unwrap();
    assert_abs_diff_eq!(offset, 0.1 + 0.2 - 0.3, epsilon = 1e-15);
    let hidden_only = PauliSum::from_terms(
        2,
        vec![
            (0.8, PauliString::x(0)),
            (0.4, PauliString::z(0)),
            (0.9, PauliString::x(1)),
            (-0.5, PauliString::z(1)),
        ],
    )
    .unwrap()
    .to_dense();
    assert!(reduced.max_abs_diff(&hidden_only).unwrap() < 1e-15);
}

#[test]
fn clamped_operator_is_the_projected_block_for_all_assignments() {
    for family in Family::ALL {
        let model = random_model(SystemLayout::new(2, 1, 2).unwrap(), family, 11);
        let full = build_hamiltonian(&model.layout, &model.spec, &model.params).unwrap().total();
        let nv = model.layout.n_visible;
        for k in 0..(1 << nv) {
            let z = visible_assignment(k, nv);
            let (reduced, offset) =
                build_clamped_hamiltonian(&model.layout, &model.spec, &model.params, &z).unwrap();
            assert!(reduced.is_hermitian());
            let rd = reduced.dim();
            for r in 0..rd {
                for col in 0..rd {
                    let mut want = full.get((r << nv) | k, (col << nv) | k);
                    if r == col {
                        want -= offset;
                    }
                    assert!((reduced.get(r, col) - want).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn clamping_rejects_non_spin_values() {
    let layout = pair_layout();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let params = pair_params([1.0, 1.0], [0.0, 0.0], 1.0);
    assert!(build_clamped_hamiltonian(&layout, &spec, &params, &[0.5]).is_err());
    assert!(build_clamped_hamiltonian(&layout, &spec, &params, &[1.0, 1.0]).is_err());
}

#[test]
fn symmetric_data_gives_zero_visible_bias() {
    let layout = SystemLayout::new(3, 1, 2).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = init_parameters(&layout, &spec, &[0.0, 0.0, 0.0], &InitConfig::default(), &mut rng)
        .unwrap();
    assert_eq!(&p.bias[..3], &[0.0, 0.0, 0.0]);
    assert_eq!(InitConfig::default().gamma_mean, 1.0);
}

#[test]
fn visible_bias_logit_is_clipped() {
    assert_abs_diff_eq!(visible_bias_logit(0.0, 1e-3), 0.0);
    assert_abs_diff_eq!(visible_bias_logit(1.0, 1e-3), (0.999f64 / 0.001).ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(visible_bias_logit(-1.0, 1e-3), -(0.999f64 / 0.001).ln(), epsilon = 1e-12);
    // p = 0.75
    assert_abs_diff_eq!(visible_bias_logit(0.5, 1e-3), 3f64.ln(), epsilon = 1e-12);
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn initial_distributions_have_stated_variances() {
    let layout = SystemLayout::new(1, 10, 0).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let cfg = InitConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut hidden, mut weights, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
    while hidden.len() < 100_000 {
        let p = init_parameters(&layout, &spec, &[0.2], &cfg, &mut rng).unwrap();
        hidden.extend_from_slice(&p.bias[1..]);
        weights.extend_from_slice(&p.weights);
        gamma.extend_from_slice(&p.gamma);
    }
    let v = sample_variance(&hidden);
    assert!((v / 2.5e-5 - 1.0).abs() < 0.1, "hidden-bias variance {v}");
    let v = sample_variance(&weights);
    assert!((v / 1e-4 - 1.0).abs() < 0.1, "weight variance {v}");
    let v = sample_variance(&gamma);
    assert!((v / 2.5e-5 - 1.0).abs() < 0.1, "field variance {v}");
    let mean = gamma.iter().sum::<f64>() / gamma.len() as f64;
    assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-4);
}

#[test]
fn interaction_weights_are_standard_normal() {
    let layout = SystemLayout::new(2, 1, 2).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draws = Vec::new();
    while draws.len() < 40_000 {
        let p = init_parameters(&layout, &spec, &[0.0, 0.0], &InitConfig::default(), &mut rng)
            .unwrap();
        draws.extend_from_slice(&p.interaction);
    }
    assert!((sample_variance(&draws) - 1.0).abs() < 0.05);
}

#[test]
fn trainable_vector_round_trips() {
    let mut model = random_model(SystemLayout::new(3, 1, 2).unwrap(), Family::RestrictedXx, 3);
    let theta = model.trainable();
    assert_eq!(theta.len(), model.trainable_count());
    assert_eq!(theta.len(), 4 + 3);
    let frozen = model.params.frozen(&model.layout);
    let shifted: Vec<f64> = theta.iter().map(|t| t + 1.0).collect();
    model.set_trainable(&shifted).unwrap();
    assert_eq!(model.trainable(), shifted);
    assert_eq!(model.params.frozen(&model.layout), frozen);
    assert!(model.set_trainable(&theta[1..]).is_err());
}

#[test]
fn trainable_observables_are_parameter_derivatives() {
    for family in Family::ALL {
        let model = random_model(SystemLayout::new(2, 1, 2).unwrap(), family, 9);
        let base = HamiltonianTerms::from_model(&model).unwrap().total().to_dense();
        let obs = trainable_observables(&model.layout, &model.spec);
        let theta = model.trainable();
        for (k, o) in obs.iter().enumerate() {
            let mut bumped = model.clone();
            let mut t = theta.clone();
            t[k] += 1.0;
            bumped.set_trainable(&t).unwrap();
            let h = HamiltonianTerms::from_model(&bumped).unwrap().total().to_dense();
            let d = h.sub(&base).unwrap();
            assert!(d.max_abs_diff(&o.to_dense()).unwrap() < 1e-12, "{family} param {k}");
        }
    }
}

#[test]
fn thermometer_block_acts_only_on_thermometer_sites() {
    let model = random_model(SystemLayout::new(2, 1, 3).unwrap(), Family::RestrictedXx, 4);
    let terms = HamiltonianTerms::from_model(&model).unwrap();
    let tmask: u64 = ((1u64 << 3) - 1) << 3;
    for (_, p) in terms.thermometer.terms() {
        assert_eq!(p.support() & !tmask, 0);
    }
    let local = terms.thermometer_local(&model.layout).to_dense();
    let lifted = local.kron(&DenseOperator::identity(3));
    assert!(lifted.max_abs_diff(&terms.thermometer.to_dense()).unwrap() < 1e-14);
    let qbm = terms.qbm_local(&model.layout).to_dense();
    let lifted = DenseOperator::identity(3).kron(&qbm);
    assert!(lifted.max_abs_diff(&terms.qbm.to_dense()).unwrap() < 1e-14);
}

#[test]
fn document_round_trips_through_json() {
    let model = random_model(SystemLayout::new(3, 1, 2).unwrap(), Family::SemiRestrictedTransverseIsing, 8);
    let doc = model.to_document(Some(8));
    let text = serde_json::to_string_pretty(&doc).unwrap();
    let back: ModelDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
    let rebuilt = QbmModel::from_document(&back).unwrap();
    assert_eq!(rebuilt, model);
    for key in ["layout", "family", "edges", "gamma", "bias", "weights", "interaction", "seed"] {
        assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
    }
}

#[test]
fn document_with_unknown_edge_key_is_rejected() {
    let model = random_model(SystemLayout::new(2, 1, 2).unwrap(), Family::RestrictedTransverseIsing, 8);
    let mut doc = model.to_document(None);
    doc.weights.insert("0-1".into(), 0.3);
    assert!(QbmModel::from_document(&doc).is_err());
}

fn small_layouts() -> impl Strategy<Value = (SystemLayout, Family, u64)> {
    (1usize..=3, 0usize..=2, 0usize..=3, 0usize..3, any::<u64>()).prop_map(|(v, h, t, f, s)| {
        (SystemLayout::new(v, h, t).unwrap(), Family::ALL[f], s)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_hamiltonians_are_hermitian((layout, family, seed) in small_layouts()) {
        let model = random_model(layout, family, seed);
        let blocks = build_hamiltonian(&model.layout, &model.spec, &model.params).unwrap();
        for op in [&blocks.qbm, &blocks.thermometer, &blocks.interaction, &blocks.total()] {
            prop_assert!(op.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn interaction_commutes_with_visible_z((layout, family, seed) in small_layouts()) {
        let model = random_model(layout, family, seed);
        let hint = build_hamiltonian(&model.layout, &model.spec, &model.params).unwrap().interaction;
        for v in model.layout.visible_sites() {
            let z = build_pauli(v, Axis::Z, model.layout.n()).unwrap();
            let comm = hint.matmul(&z).unwrap().sub(&z.matmul(&hint).unwrap()).unwrap();
            prop_assert!(comm.max_abs() < 1e-12);
        }
    }

    #[test]
    fn restricted_ti_without_field_is_diagonal((layout, _f, seed) in small_layouts()) {
        let mut model = random_model(layout, Family::RestrictedTransverseIsing, seed);
        model.params.gamma.iter_mut().for_each(|g| *g = 0.0);
        let h = build_hamiltonian(&model.layout, &model.spec, &model.params).unwrap().total();
        let d = h.dim();
        for r in 0..d {
            for col in 0..d {
                if r != col {
                    prop_assert_eq!(h.get(r, col), Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}
