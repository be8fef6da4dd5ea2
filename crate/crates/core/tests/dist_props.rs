use proptest::prelude::*;
use score_forge_core::dist::{forward_perturb, oracle_density, oracle_score, sample_p0, GaussianMixture};
use score_forge_core::legendre::GaussLegendre;
use score_forge_core::Points;

fn mixture_strategy() -> impl Strategy<Value = GaussianMixture> {
    (1usize..4)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.1f64..1.0, k),
                prop::collection::vec(-5.0f64..5.0, k),
                prop::collection::vec(0.05f64..3.0, k),
            )
        })
        .prop_map(|(w, m, v)| {
            let total: f64 = w.iter().sum();
            let w = w.iter().map(|x| x / total).collect();
            GaussianMixture::new(1, w, m.into_iter().map(|x| vec![x]).collect(), v).unwrap()
        })
}

fn mass_on_window(mix: &GaussianMixture, t: f64) -> f64 {
    let or = mix.smoothed(t).unwrap();
    let reach = mix.max_mean_norm() + 8.0 * (mix.max_variance() + t).sqrt();
    let gl = GaussLegendre::new(64);
    let pieces = 400;
    let width = 2.0 * reach / pieces as f64;
    (0..pieces)
        .map(|i| {
            let a = -reach + width * i as f64;
            gl.integrate_on(a, a + width, |x| oracle_density(&or, &[x]))
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn density_integrates_to_one(mix in mixture_strategy(), t in 0.0f64..4.0) {
        prop_assert!((mass_on_window(&mix, t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn score_matches_log_density_differences(mix in mixture_strategy(), t in 0.0f64..2.0, seed in any::<u64>()) {
        let or = mix.smoothed(t).unwrap();
        let xs = or.sample(200, seed);
        for x in xs.rows() {
            let h = 1e-5 * (1.0 + x[0].abs());
            let fd = (or.log_density(&[x[0] + h]) - or.log_density(&[x[0] - h])) / (2.0 * h);
            let s = oracle_score(&or, x)[0];
            prop_assert!((fd - s).abs() <= 1e-5 * s.abs().max(1.0), "x={} fd={} s={}", x[0], fd, s);
        }
    }

    #[test]
    fn smoothing_is_a_semigroup(
        mean in -5.0f64..5.0,
        var in 1u32..64,
        a in 0u32..64,
        b in 0u32..64,
        x in -10.0f64..10.0,
    ) {
        // Dyadic times and variances keep the variance sums exact.
        let mix = GaussianMixture::new(1, vec![0.25, 0.75], vec![vec![mean], vec![-mean]], vec![var as f64 / 16.0, 1.0]).unwrap();
        let (t1, t2) = (a as f64 / 16.0, b as f64 / 16.0);
        let direct = mix.smoothed(t1 + t2).unwrap();
        let staged = mix.convolved(t1).unwrap().smoothed(t2).unwrap();
        prop_assert_eq!(direct.log_density(&[x]), staged.log_density(&[x]));
        prop_assert_eq!(direct.score(&[x]), staged.score(&[x]));
    }

    #[test]
    fn density_is_positive(mix in mixture_strategy(), t in 0.0f64..4.0, x in -40.0f64..40.0) {
        let or = mix.smoothed(t).unwrap();
        prop_assert!(or.log_density(&[x]).is_finite());
        prop_assert!(or.score(&[x])[0].is_finite());
    }
}

#[test]
fn squared_score_is_bounded_by_dimension_over_time() {
    let mix = GaussianMixture::symmetric_pair(3.0, 1.0).unwrap();
    for &t in &[0.1, 1.0] {
        let or = mix.smoothed(t).unwrap();
        let xs = or.sample(1_000_000, 5);
        let m = xs.rows().map(|x| or.score(x)[0].powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(m <= (1.0 / t) * 1.05, "t={t} E|s|^2={m}");
    }
}

#[test]
fn standard_normal_sample_moments() {
    let s = sample_p0(&GaussianMixture::standard_normal(1).unwrap(), 100_000, 17);
    assert!(s.mean()[0].abs() < 0.02);
    assert!((s.variance()[0] - 1.0).abs() < 0.02);
}

#[test]
fn near_point_mass_samples_sit_on_the_mean() {
    let mix = GaussianMixture::new(1, vec![1.0], vec![vec![0.0]], vec![1e-12]).unwrap();
    let s = sample_p0(&mix, 10_000, 3);
    assert!(s.as_slice().iter().all(|v| v.abs() < 1e-5));
}

#[test]
fn symmetric_pair_sample_mean() {
    let mix = GaussianMixture::symmetric_pair(3.0, 1.0).unwrap();
    let s = sample_p0(&mix, 100_000, 23);
    assert!(s.mean()[0].abs() < 0.05);
}

#[test]
fn perturbation_adds_variance() {
    let s = sample_p0(&GaussianMixture::standard_normal(1).unwrap(), 100_000, 29);
    let p = forward_perturb(&s, 3.0, 31).unwrap();
    assert!((p.variance()[0] - 4.0).abs() < 0.1);
    assert_eq!(forward_perturb(&s, 0.0, 31).unwrap(), s);
}

#[test]
fn perturbation_is_reproducible() {
    let origin = Points::zeros(3, 1);
    let a = forward_perturb(&origin, 1.0, 99).unwrap();
    let b = forward_perturb(&origin, 1.0, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, forward_perturb(&origin, 1.0, 100).unwrap());
}

#[test]
fn oracle_examples() {
    let n01 = GaussianMixture::standard_normal(1).unwrap();
    let or = n01.smoothed(1.0).unwrap();
    assert!((oracle_density(&or, &[0.0]) - 0.282_094_791_773_878_1).abs() < 1e-12);
    assert!((oracle_score(&or, &[3.0])[0] + 1.5).abs() < 1e-12);

    let pair = GaussianMixture::symmetric_pair(3.0, 1.0).unwrap();
    for t in [0.0, 0.3, 5.0] {
        let or = pair.smoothed(t).unwrap();
        assert_eq!(oracle_score(&or, &[0.0])[0], 0.0);
        assert_eq!(oracle_density(&or, &[1.7]), oracle_density(&or, &[-1.7]));
    }
    let expected = (-4.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let p0 = pair.smoothed(0.0).unwrap();
    assert!((oracle_density(&p0, &[0.0]) - expected).abs() < 1e-15);
}
