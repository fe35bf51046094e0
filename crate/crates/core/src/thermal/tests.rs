use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::noise::NoiseConfig;
use crate::spectral::eig_hermitian;
use crate::spin_ops::{
    build_pauli, init_parameters, Axis, DenseOperator, Family, InitConfig, ModelSpec, PauliString,
    PauliSum, QbmModel, SystemLayout,
};

fn random_hermitian(n: usize, seed: u64) -> DenseOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1usize << n;
    let mut data = vec![Complex64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for c in r..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if r != c { rng.sample(StandardNormal) } else { 0.0 };
            data[r * d + c] = Complex64::new(re, im);
            data[c * d + r] = Complex64::new(re, -im);
        }
    }
    DenseOperator::from_row_major(n, data).unwrap()
}

/// Periodic mixed-field Ising ring, a standard nonintegrable model.
fn mixed_field_chain(n: usize) -> PauliSum {
    let mut h = PauliSum::new(n);
    for s in 0..n {
        h.push(0.9045, PauliString::x(s)).unwrap();
        h.push(0.8090, PauliString::z(s)).unwrap();
        h.push(1.0, PauliString::zz(s, (s + 1) % n)).unwrap();
    }
    h
}

fn diagnostic_model(n_v: usize, seed: u64) -> QbmModel {
    let layout = SystemLayout::new(n_v, 1, 2).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params =
        init_parameters(&layout, &spec, &vec![0.0; n_v], &InitConfig::default(), &mut rng).unwrap();
    for s in layout.qbm_sites() {
        params.bias[s] = rng.sample(StandardNormal);
    }
    for w in params.weights.iter_mut() {
        *w = rng.sample(StandardNormal);
    }
    QbmModel::new(layout, spec, params).unwrap()
}

#[test]
fn infinite_temperature_gives_normalized_trace() {
    let h = random_hermitian(3, 1);
    let e = eig_hermitian(&h).unwrap();
    for (site, axis) in [(0, Axis::X), (1, Axis::Z), (2, Axis::Y)] {
        let o = build_pauli(site, axis, 3).unwrap();
        assert_abs_diff_eq!(gibbs_expectation(&o, &e, 0.0).unwrap(), 0.0, epsilon = 1e-12);
    }
    let id = DenseOperator::identity(3);
    assert_abs_diff_eq!(gibbs_expectation(&id, &e, 0.0).unwrap(), 1.0, epsilon = 1e-12);
    let tr = h.trace().re / 8.0;
    assert_abs_diff_eq!(gibbs_expectation(&h, &e, 0.0).unwrap(), tr, epsilon = 1e-12);
}

#[test]
fn single_spin_magnetization() {
    let z = build_pauli(0, Axis::Z, 1).unwrap();
    let e = eig_hermitian(&z).unwrap();
    for beta in [-2.0, -0.3, 0.0, 0.7, 1.0, 4.0, 40.0] {
        assert_abs_diff_eq!(gibbs_expectation(&z, &e, beta).unwrap(), -f64::tanh(beta), epsilon = 1e-14);
    }
}

#[test]
fn extreme_beta_does_not_overflow() {
    let z = build_pauli(0, Axis::Z, 1).unwrap();
    let e = eig_hermitian(&z).unwrap();
    assert_abs_diff_eq!(gibbs_expectation(&z, &e, 1e4).unwrap(), -1.0);
    assert_abs_diff_eq!(gibbs_expectation(&z, &e, -1e4).unwrap(), 1.0);
    let ens = GibbsEnsemble::new(&e, 800.0).unwrap();
    assert_abs_diff_eq!(ens.log_partition(), 800.0, epsilon = 1e-9);
    let sum: f64 = ens.probabilities().iter().sum();
    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
}

#[test]
fn decoupled_spins_factorize() {
    let h = PauliSum::from_terms(
        2,
        vec![
            (0.4, PauliString::z(0)),
            (0.7, PauliString::x(0)),
            (-0.9, PauliString::z(1)),
            (0.2, PauliString::x(1)),
        ],
    )
    .unwrap();
    let e = eig_hermitian(&h.to_dense()).unwrap();
    let beta = 1.3;
    let g = |p: PauliString| {
        gibbs_expectation(&PauliSum::single(2, 1.0, p).unwrap().to_dense(), &e, beta).unwrap()
    };
    assert_abs_diff_eq!(
        g(PauliString::zz(0, 1)),
        g(PauliString::z(0)) * g(PauliString::z(1)),
        epsilon = 1e-12
    );
}

#[test]
fn gibbs_expectation_checks_dimensions() {
    let e = eig_hermitian(&random_hermitian(2, 3)).unwrap();
    assert!(gibbs_expectation(&DenseOperator::identity(3), &e, 1.0).is_err());
}

#[test]
fn microcanonical_trivial_windows() {
    let h = random_hermitian(3, 4);
    let e = eig_hermitian(&h).unwrap();
    let id = DenseOperator::identity(3);
    let mid = 0.5 * (e.ground_energy() + e.max_energy());
    let range = e.max_energy() - e.ground_energy();
    assert_abs_diff_eq!(
        microcanonical_expectation(&id, &e, mid, 2.0 * range).unwrap(),
        1.0,
        epsilon = 1e-12
    );
    let o = build_pauli(1, Axis::Z, 3).unwrap();
    let k = 3;
    let gap = (e.eigenvalues()[k + 1] - e.eigenvalues()[k]).min(e.eigenvalues()[k] - e.eigenvalues()[k - 1]);
    let single = microcanonical_expectation(&o, &e, e.eigenvalues()[k], 0.5 * gap).unwrap();
    assert_abs_diff_eq!(single, o.expectation(e.vector(k)).unwrap(), epsilon = 1e-12);
    assert!(matches!(
        microcanonical_expectation(&o, &e, e.max_energy() + 10.0, 1.0),
        Err(crate::Error::EmptyWindow { .. })
    ));
}

#[test]
fn microcanonical_and_canonical_agree_on_chaotic_chain() {
    let n = 8;
    let h = mixed_field_chain(n);
    let e = eig_hermitian(&h.to_dense()).unwrap();
    let omega = 0.1 * (e.max_energy() - e.ground_energy());
    for beta in [0.1, 0.25] {
        let energy = thermal_energy(e.eigenvalues(), beta);
        let uniform = |f: &dyn Fn(usize) -> PauliString| {
            PauliSum::from_terms(n, (0..n).map(|s| (1.0 / n as f64, f(s))).collect()).unwrap()
        };
        let observables = [
            uniform(&PauliString::z),
            uniform(&PauliString::x),
            uniform(&|s| PauliString::zz(s, (s + 1) % n)),
        ];
        for sum in &observables {
            let dense = sum.to_dense();
            let canonical = gibbs_expectation(&dense, &e, beta).unwrap();
            let micro = microcanonical_expectation(&dense, &e, energy, omega).unwrap();
            // Pauli averages span [-1, 1]; allow 5% of that range.
            assert!((canonical - micro).abs() < 0.1, "beta {beta}: {canonical} vs {micro}");
        }
    }
}

#[test]
fn inversion_at_mean_energy_is_infinite_temperature() {
    let h = random_hermitian(4, 5);
    let e = eig_hermitian(&h).unwrap();
    let mean = h.trace().re / 16.0;
    assert_abs_diff_eq!(invert_beta(e.eigenvalues(), mean).unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn single_spin_inversion() {
    let beta = invert_beta(&[-1.0, 1.0], -f64::tanh(1.0)).unwrap();
    assert_abs_diff_eq!(beta, 1.0, epsilon = 1e-12);
    let beta = invert_beta(&[-1.0, 1.0], f64::tanh(0.4)).unwrap();
    assert_abs_diff_eq!(beta, -0.4, epsilon = 1e-12);
}

#[test]
fn inversion_round_trip_on_random_hamiltonians() {
    for seed in 0..5 {
        let e = eig_hermitian(&random_hermitian(6, 100 + seed)).unwrap();
        let range = e.max_energy() - e.ground_energy();
        for beta0 in [0.1, 1.0, 5.0] {
            let target = thermal_energy(e.eigenvalues(), beta0);
            let beta = invert_beta(e.eigenvalues(), target).unwrap();
            assert!((beta - beta0).abs() < 1e-8, "seed {seed}: {beta} vs {beta0}");
            assert!((thermal_energy(e.eigenvalues(), beta) - target).abs() < 1e-9 * range);
        }
    }
}

#[test]
fn inversion_outside_spectrum_fails() {
    let levels = [-2.0, 0.5, 3.0];
    for target in [-2.0, 3.0, -5.0, 4.0, f64::NAN] {
        assert!(matches!(invert_beta(&levels, target), Err(crate::Error::EnergyOutOfRange { .. })));
    }
}

#[test]
fn default_time_window() {
    let w = TimeWindow::default();
    let unit = (2.0 / std::f64::consts::PI).sqrt();
    assert_abs_diff_eq!(w.lo, unit);
    assert_abs_diff_eq!(w.hi, 10.0 * unit);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ts = w.sample_n(2, &mut rng);
    assert_eq!(ts.len(), 2);
    assert!(ts.iter().all(|t| (w.lo..w.hi).contains(t)));
}

#[test]
fn classical_limit_does_not_thermalize() {
    let mut model = diagnostic_model(3, 9);
    model.params.gamma.iter_mut().for_each(|g| *g = 0.0);
    let system = QuenchSystem::new(&model).unwrap();
    let n = model.layout.n();
    let mut obs = ObservableSet::new();
    for s in 0..n {
        obs.push(format!("z{s}"), PauliSum::single(n, 1.0, PauliString::z(s)).unwrap());
    }
    obs.push("zz", PauliSum::single(n, 1.0, PauliString::zz(0, 3)).unwrap());
    obs.push("h_qbm", system.terms().qbm.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let times = TimeWindow::default().sample_n(5, &mut rng);
    let est = quench_sample(&system, &obs, &times, None, &mut rng).unwrap();
    for v in &est.values {
        assert!(v.abs() < 1e-12, "{v}");
    }
}

#[test]
fn transverse_field_eigenstate_is_stationary_with_degenerate_levels() {
    let n = 3;
    let mut h = PauliSum::new(n);
    for s in 0..n {
        h.push(1.0, PauliString::x(s)).unwrap();
    }
    let layout = SystemLayout::new(n, 0, 0).unwrap();
    let terms = crate::spin_ops::HamiltonianTerms {
        qbm: h.clone(),
        thermometer: PauliSum::new(n),
        interaction: PauliSum::new(n),
    };
    let system = QuenchSystem::from_terms(layout, terms).unwrap();
    let x0 = PauliSum::single(n, 1.0, PauliString::x(0)).unwrap();
    assert_abs_diff_eq!(system.long_time_average(&x0).unwrap(), 1.0, epsilon = 1e-12);
    let diag = plus_state_variance(&h).unwrap();
    assert_eq!(diag.variance, 0.0);
    assert!(!diag.flagged);
    assert_abs_diff_eq!(system.energy_rel_variance(), 0.0, epsilon = 1e-12);
}

#[test]
fn zero_mean_energy_is_flagged() {
    let z = build_pauli(0, Axis::Z, 1).unwrap();
    let d = energy_variance_diagnostic(&z, &plus_state(1)).unwrap();
    assert!(d.relative_variance.is_infinite());
    assert!(d.flagged);
}

#[test]
fn variance_paths_agree_on_restricted_instance() {
    let model = diagnostic_model(6, 2);
    let h = crate::spin_ops::HamiltonianTerms::from_model(&model).unwrap().total();
    let matrix = energy_variance_diagnostic(&h.to_dense(), &plus_state(model.layout.n())).unwrap();
    let formula = plus_state_variance(&h).unwrap();
    assert_abs_diff_eq!(matrix.mean, formula.mean, epsilon = 1e-10);
    assert_abs_diff_eq!(matrix.relative_variance, formula.relative_variance, epsilon = 1e-10);
    let system = QuenchSystem::new(&model).unwrap();
    assert_abs_diff_eq!(system.energy_rel_variance(), formula.relative_variance, epsilon = 1e-10);
}

#[test]
fn formula_path_rejects_mixed_terms() {
    let h = PauliSum::single(1, 1.0, PauliString::single(0, Axis::Y)).unwrap();
    assert!(plus_state_variance(&h).is_err());
}

#[test]
fn finite_time_averages_approach_the_long_time_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..4 {
        let model = diagnostic_model(3, seed);
        let system = QuenchSystem::new(&model).unwrap();
        let n = model.layout.n();
        for op in [PauliString::z(0), PauliString::zz(0, 3), PauliString::x(1)] {
            let sum = PauliSum::single(n, 1.0, op).unwrap();
            let lta = system.long_time_average(&sum).unwrap();
            let values: Vec<f64> = TimeWindow::default()
                .sample_n(16, &mut rng)
                .iter()
                .map(|&t| system.state_at(t, None, &mut rng).unwrap().expectation(&op))
                .collect();
            let mean = values.iter().sum::<f64>() / 16.0;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 15.0).sqrt();
            assert!(sd > (mean - lta).abs(), "seed {seed}: sd {sd}, |mean - lta| {}", (mean - lta).abs());
        }
    }
}

#[test]
fn gibbs_energy_decreases_with_beta() {
    for seed in 0..5 {
        let e = eig_hermitian(&random_hermitian(4, 200 + seed)).unwrap();
        let energies: Vec<f64> =
            [-1.0, -0.2, 0.3, 1.0, 2.5].iter().map(|&b| thermal_energy(e.eigenvalues(), b)).collect();
        assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
    }
}

#[test]
fn estimate_serializes_with_expected_fields() {
    let model = diagnostic_model(2, 5);
    let system = QuenchSystem::new(&model).unwrap();
    let n = model.layout.n();
    let mut obs = ObservableSet::new();
    obs.push("z0", PauliSum::single(n, 1.0, PauliString::z(0)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let est = quench_sample(&system, &obs, &[1.0, 2.0], None, &mut rng).unwrap();
    let json: serde_json::Value = serde_json::to_value(&est).unwrap();
    for key in ["times", "observables", "beta_therm", "beta_full", "energy_rel_variance"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["observables"]["z0"].as_f64().unwrap(), est.values[0]);
    assert!(quench_sample(&system, &obs, &[], None, &mut rng).is_err());
    assert!(quench_sample(&system, &obs, &[-1.0], None, &mut rng).is_err());
}

#[test]
fn quench_with_channels_reads_a_mixed_state() {
    let model = diagnostic_model(2, 6);
    let system = QuenchSystem::new(&model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let state = system.state_at(2.0, Some(&NoiseConfig::reference()), &mut rng).unwrap();
    assert!(matches!(state, QuenchState::Mixed(_)));
    let p: f64 = state.populations().iter().sum();
    assert_abs_diff_eq!(p, 1.0, epsilon = 1e-10);
    let pure = system.state_at(2.0, Some(&NoiseConfig::shots_only(1000)), &mut rng).unwrap();
    assert!(matches!(pure, QuenchState::Pure(_)));
    let table = system.visible_distribution(&[1.0, 3.0], None, &mut rng).unwrap();
    assert_eq!(table.len(), 4);
    assert_abs_diff_eq!(table.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pauli_estimates_stay_in_range(seed in any::<u64>(), t in 0.0f64..10.0, noisy in any::<bool>()) {
        let model = diagnostic_model(2, seed);
        let system = QuenchSystem::new(&model).unwrap();
        let n = model.layout.n();
        let mut obs = ObservableSet::new();
        for s in 0..n {
            obs.push(format!("z{s}"), PauliSum::single(n, 1.0, PauliString::z(s)).unwrap());
            obs.push(format!("x{s}"), PauliSum::single(n, 1.0, PauliString::x(s)).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = NoiseConfig::reference().with_shots(None);
        let noise = if noisy { Some(&cfg) } else { None };
        let est = quench_sample(&system, &obs, &[t], noise, &mut rng).unwrap();
        for v in est.values {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
}
