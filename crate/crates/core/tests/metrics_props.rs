use proptest::prelude::*;
use score_forge_core::dist::GaussianMixture;
use score_forge_core::metrics::{
    fit_rate_slope, integrated_score_error, score_mse, tv_distance_1d, tv_empirical_1d, RatePoint,
};
use score_forge_core::sampler::{OracleScore, ZeroScore};

fn normal(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
    let mix = GaussianMixture::new(1, vec![1.0], vec![vec![mean]], vec![var]).unwrap();
    let or = mix.smoothed(0.0).unwrap();
    move |x| or.density(&[x])
}

#[test]
fn tv_of_shifted_normals() {
    let tv = tv_distance_1d(normal(0.0, 1.0), normal(1.0, 1.0), -12.0, 13.0, 4001).unwrap();
    assert!((tv - 0.382_924_922_548_026_24).abs() < 1e-9, "{tv}");
    assert_eq!(tv_distance_1d(normal(0.0, 1.0), normal(0.0, 1.0), -12.0, 12.0, 1000).unwrap(), 0.0);
}

#[test]
fn tv_of_disjoint_normals() {
    let tv = tv_distance_1d(normal(-50.0, 0.01), normal(50.0, 0.01), -60.0, 60.0, 200_001).unwrap();
    assert!((tv - 1.0).abs() < 1e-6, "{tv}");
}

#[test]
fn mse_of_oracle_is_zero() {
    let mix = GaussianMixture::symmetric_pair(3.0, 1.0).unwrap();
    for t in [0.01, 0.5, 4.0] {
        let est = score_mse(&OracleScore::new(mix.clone()), &mix.smoothed(t).unwrap(), 500, 3).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }
}

#[test]
fn mse_of_zero_field_is_the_score_energy() {
    let mix = GaussianMixture::standard_normal(1).unwrap();
    let est = score_mse(&ZeroScore { dim: 1 }, &mix.smoothed(1.0).unwrap(), 20_000, 5).unwrap();
    assert!((est.value - 0.5).abs() < 4.0 * est.stderr, "{est:?}");
}

#[test]
fn mse_rejects_few_draws() {
    let mix = GaussianMixture::standard_normal(1).unwrap();
    assert!(score_mse(&ZeroScore { dim: 1 }, &mix.smoothed(1.0).unwrap(), 99, 5).is_err());
}

#[test]
fn integrated_error_of_zero_field() {
    let mix = GaussianMixture::standard_normal(1).unwrap();
    let coarse = integrated_score_error(&ZeroScore { dim: 1 }, &mix, 0.1, 10.0, 20, 4000, 7).unwrap();
    let fine = integrated_score_error(&ZeroScore { dim: 1 }, &mix, 0.1, 10.0, 40, 4000, 7).unwrap();
    let exact = (11.0f64 / 1.1).ln();
    assert!((coarse.value - exact).abs() < 0.1, "{}", coarse.value);
    assert!((fine.value / coarse.value - 1.0).abs() < 0.05);
    let oracle = integrated_score_error(&OracleScore::new(mix.clone()), &mix, 0.1, 10.0, 20, 200, 7).unwrap();
    assert_eq!(oracle.value, 0.0);
}

#[test]
fn empirical_tv_noise_floor_and_separation() {
    let base = GaussianMixture::new(1, vec![1.0], vec![vec![0.0]], vec![0.9]).unwrap();
    let reference = base.smoothed(0.1).unwrap();
    let exact = reference.sample(100_000, 31).into_vec();
    let floor = tv_empirical_1d(&exact, &reference, 2000).unwrap();
    assert!(floor <= 0.03, "{floor}");
    assert_eq!(floor, tv_empirical_1d(&exact, &reference, 2000).unwrap());

    let far = GaussianMixture::new(1, vec![1.0], vec![vec![5.0]], vec![1.0]).unwrap();
    let shifted = far.sample(100_000, 37).into_vec();
    let tv = tv_empirical_1d(&shifted, &reference, 2000).unwrap();
    assert!(tv >= 0.95, "{tv}");
    assert!(tv_empirical_1d(&exact[..9_999], &reference, 2000).is_err());
}

fn normal_pair() -> impl Strategy<Value = ((f64, f64), (f64, f64))> {
    ((-3.0f64..3.0, 0.2f64..4.0), (-3.0f64..3.0, 0.2f64..4.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_is_symmetric_and_bounded(((m1, v1), (m2, v2)) in normal_pair()) {
        let (lo, hi) = (-20.0, 20.0);
        let ab = tv_distance_1d(normal(m1, v1), normal(m2, v2), lo, hi, 8001).unwrap();
        let ba = tv_distance_1d(normal(m2, v2), normal(m1, v1), lo, hi, 8001).unwrap();
        prop_assert!((ab - ba).abs() < 1e-8);
        prop_assert!((-1e-8..=1.0 + 1e-8).contains(&ab));
    }

    #[test]
    fn slope_ignores_scale(
        ys in prop::collection::vec(1e-3f64..1e3, 3..12),
        factor in 1e-6f64..1e6,
    ) {
        let pts: Vec<RatePoint> = ys.iter().enumerate()
            .map(|(i, &y)| RatePoint { x: 1.5f64.powi(i as i32), y, stderr: 0.0, seed: 0 })
            .collect();
        let scaled: Vec<RatePoint> = pts.iter().map(|p| RatePoint { y: p.y * factor, ..*p }).collect();
        let (a, b) = (fit_rate_slope(&pts).unwrap(), fit_rate_slope(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() < 1e-12);
        prop_assert!((b.intercept - a.intercept - factor.ln()).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a.r2));
    }

    #[test]
    fn exact_power_laws_are_recovered(c in 0.01f64..100.0, k in -3.0f64..3.0) {
        let pts: Vec<RatePoint> = (1..=6)
            .map(|i| { let x = 2f64.powi(i); RatePoint { x, y: c * x.powf(k), stderr: 0.0, seed: 0 } })
            .collect();
        let fit = fit_rate_slope(&pts).unwrap();
        prop_assert!((fit.slope - k).abs() < 1e-10);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-10 || k.abs() < 1e-12);
    }
}
