use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::rbm::RbmParameters;
use crate::spin_ops::{init_parameters, Family, InitConfig, ModelSpec, QbmParameters, SystemLayout};

fn qbm(n_v: usize, n_h: usize, family: Family, seed: u64) -> QbmModel {
    let layout = SystemLayout::new(n_v, n_h, 0).unwrap();
    let spec = ModelSpec::standard(&layout, family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params =
        init_parameters(&layout, &spec, &vec![0.0; n_v], &InitConfig::default(), &mut rng).unwrap();
    use rand_distr::{Distribution, StandardNormal};
    for b in params.bias.iter_mut().chain(params.weights.iter_mut()) {
        *b = StandardNormal.sample(&mut rng);
    }
    QbmModel::new(layout, spec, params).unwrap()
}

#[test]
fn single_sharp_mode_is_a_delta() {
    let mix = BernoulliMixture::new(3, vec![0b101], vec![1.0]).unwrap();
    let table = mix.table();
    for (k, p) in table.iter().enumerate() {
        assert_eq!(*p, if k == 0b101 { 1.0 } else { 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(mix.sample(100, &mut rng).iter().all(|&s| s == 0b101));
}

#[test]
fn fair_mode_is_uniform() {
    let mix = BernoulliMixture::new(4, vec![0b0110], vec![0.5]).unwrap();
    for p in mix.table() {
        assert_abs_diff_eq!(p, 1.0 / 16.0, epsilon = 1e-15);
    }
}

#[test]
fn random_mixture_is_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let mix = BernoulliMixture::random(4, 8, 0.9, &mut rng).unwrap();
        assert_eq!(mix.modes(), 8);
        assert_abs_diff_eq!(mix.table().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn mixture_probability_matches_closed_form() {
    let mix = BernoulliMixture::new(4, vec![0b0000, 0b1111], vec![0.9, 0.7]).unwrap();
    let p = mixture_probability(&mix, 0b0001);
    let expect = 0.5 * (0.9f64.powi(3) * 0.1 + 0.7 * 0.3f64.powi(3));
    assert_abs_diff_eq!(p, expect, epsilon = 1e-15);
}

#[test]
fn invalid_mixtures_are_rejected() {
    assert!(BernoulliMixture::new(3, vec![], vec![]).is_err());
    assert!(BernoulliMixture::new(3, vec![0b1000], vec![0.9]).is_err());
    assert!(BernoulliMixture::new(3, vec![1], vec![1.5]).is_err());
    assert!(BernoulliMixture::new(3, vec![1, 2], vec![0.9]).is_err());
    assert!(BernoulliMixture::new(0, vec![0], vec![0.9]).is_err());
}

#[test]
fn sample_frequencies_match_the_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mix = BernoulliMixture::random(4, 8, 0.9, &mut rng).unwrap();
    let n = 1_000_000;
    let freq = empirical_table(&sample_mixture(&mix, n, &mut rng), 4).unwrap();
    for (f, p) in freq.iter().zip(mix.table()) {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 3.0 * sigma + 1e-12, "{f} vs {p} (sigma {sigma})");
    }
}

#[test]
fn data_means_follow_the_table() {
    let mix = BernoulliMixture::new(2, vec![0b00], vec![0.9]).unwrap();
    let m = mix.means();
    assert_abs_diff_eq!(m[0], 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(m[1], 0.8, epsilon = 1e-12);
}

#[test]
fn zero_parameter_models_are_uniform() {
    let layout = SystemLayout::new(3, 1, 0).unwrap();
    let spec = ModelSpec::standard(&layout, Family::RestrictedTransverseIsing);
    let mut params = QbmParameters::zeros(&layout, &spec);
    params.gamma.iter_mut().for_each(|g| *g = 1.0);
    let model = QbmModel::new(layout, spec, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for beta in [0.1, 1.0, 7.0] {
        let t = model_distribution(ModelSource::Exact { model: &model, beta }, None, &mut rng).unwrap();
        for p in t {
            assert_abs_diff_eq!(p, 0.125, epsilon = 1e-12);
        }
    }
    let rbm = RbmParameters::zeros(3, 1);
    for p in model_distribution(ModelSource::Rbm(&rbm), None, &mut rng).unwrap() {
        assert_abs_diff_eq!(p, 0.125, epsilon = 1e-12);
    }
}

#[test]
fn exact_tables_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (seed, family) in Family::ALL.iter().enumerate() {
        let model = qbm(4, 1, *family, seed as u64);
        let t = model_distribution(ModelSource::Exact { model: &model, beta: 1.0 }, None, &mut rng).unwrap();
        assert_eq!(t.len(), 16);
        assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn resampling_uses_the_budget() {
    let model = qbm(3, 1, Family::RestrictedTransverseIsing, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let src = ModelSource::Exact { model: &model, beta: 1.0 };
    assert!(model_distribution(src, Some(0), &mut rng).is_err());
    let t = model_distribution(src, Some(FINAL_SAMPLE_BUDGET), &mut rng).unwrap();
    assert_eq!(FINAL_SAMPLE_BUDGET, 1024);
    for p in &t {
        let count = p * 1024.0;
        assert_abs_diff_eq!(count, count.round(), epsilon = 1e-9);
    }
    assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn gibbs_state_depends_only_on_beta_times_h() {
    let model = qbm(3, 1, Family::RestrictedXx, 6);
    let c = 2.5;
    let mut scaled = model.clone();
    for x in scaled
        .params
        .gamma
        .iter_mut()
        .chain(scaled.params.bias.iter_mut())
        .chain(scaled.params.weights.iter_mut())
    {
        *x /= c;
    }
    let a = qbm_distribution_exact(&model, 0.8).unwrap();
    let b = qbm_distribution_exact(&scaled, 0.8 * c).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
}

#[test]
fn kl_examples() {
    let p = vec![0.1, 0.2, 0.3, 0.4];
    let kl = kl_divergence(&p, &p).unwrap();
    assert_eq!(kl.nats, 0.0);
    assert!(!kl.floored);
    let mut delta = vec![0.0; 8];
    delta[5] = 1.0;
    let uniform = vec![0.125; 8];
    assert_abs_diff_eq!(kl_divergence(&delta, &uniform).unwrap().nats, 8f64.ln(), epsilon = 1e-14);
    let flagged = kl_divergence(&uniform, &delta).unwrap();
    assert!(flagged.floored);
    assert!(flagged.nats.is_finite());
}

#[test]
fn kl_rejects_bad_tables() {
    assert!(matches!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]), Err(Error::Unnormalized(_))));
    assert!(kl_divergence(&[0.5, 0.5], &[1.0]).is_err());
}

#[test]
fn aic_examples() {
    assert_eq!(aic(0.0, 0), 0.0);
    assert_eq!(aic(5.0, 10), 30.0);
    assert_eq!(rbm_trainable_count(4, 1), 4 + 1 + 4);
    assert_eq!(RbmParameters::zeros(6, 2).trainable_count(), rbm_trainable_count(6, 2));
}

#[test]
fn metric_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = vec![0.25; 4];
    let q = vec![0.1, 0.2, 0.3, 0.4];
    let report = MetricReport::evaluate(&p, &q, 3, Some(1024)).unwrap();
    assert_abs_diff_eq!(report.aic, 2.0 * (3.0 + report.loss), epsilon = 1e-14);
    let path = dir.path().join("metrics.json");
    report.write_json(&path).unwrap();
    let back: MetricReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn table_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let table = BernoulliMixture::random(3, 2, 0.8, &mut rng).unwrap().table();
    let path = dir.path().join("table.csv");
    write_table_csv(&path, &table).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("bitstring,probability\n+++,"));
    assert_eq!(read_table_csv(&path).unwrap(), table);
    assert_eq!(parse_bitstring(&bitstring(0b110, 3)).unwrap(), 0b110);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_zero_only_on_equality(
        a in prop::collection::vec(0.0f64..1.0, 8),
        b in prop::collection::vec(0.01f64..1.0, 8),
    ) {
        let norm = |v: &Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        prop_assume!(a.iter().sum::<f64>() > 0.1);
        let (p, q) = (norm(&a), norm(&b));
        let kl = kl_divergence(&p, &q).unwrap().nats;
        prop_assert!(kl >= -1e-15);
        prop_assert!(kl_divergence(&p, &p).unwrap().nats.abs() < 1e-12);
    }

    #[test]
    fn kl_is_invariant_under_relabeling(
        a in prop::collection::vec(0.01f64..1.0, 8),
        b in prop::collection::vec(0.01f64..1.0, 8),
        perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let norm = |v: &Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (norm(&a), norm(&b));
        let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        let x = kl_divergence(&p, &q).unwrap().nats;
        let y = kl_divergence(&pp, &qp).unwrap().nats;
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn mixture_is_covariant_under_bit_permutations(
        seed in any::<u64>(),
        perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        config in 0usize..32,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix = BernoulliMixture::random(5, 3, 0.85, &mut rng).unwrap();
        let permute = |x: usize| (0..5).fold(0, |acc, b| acc | (((x >> b) & 1) << perm[b]));
        let permuted = BernoulliMixture::new(
            5,
            mix.centers.iter().map(|&c| permute(c)).collect(),
            mix.fidelities.clone(),
        ).unwrap();
        let a = mix.probability(config);
        let b = permuted.probability(permute(config));
        prop_assert!((a - b).abs() < 1e-15);
    }
}
