use kpzlab::bridges::{sample_correlated_pair, CorrelationSpec};
use kpzlab::sigma::{
    definition_integrand, estimate_sigma2, estimate_sigma2_r, identical_bridge_sigma2, independent_bridge_sigma2,
    predicted_exponent, shifted_bound, shifted_integrand, Coupling, EstimatorForm, SigmaRun,
};
use proptest::prelude::*;

#[test]
fn forms_agree_at_l8() {
    let est: Vec<_> = EstimatorForm::ALL
        .iter()
        .enumerate()
        .map(|(i, &f)| estimate_sigma2(8.0, 100_000, 64, f, 100 + i as u64).unwrap())
        .collect();
    for a in 0..est.len() {
        for b in a + 1..est.len() {
            let (x, y) = (&est[a], &est[b]);
            let se = x.std_error.hypot(y.std_error);
            assert!((x.mean - y.mean).abs() < 4.0 * se, "{:?} {} vs {:?} {}", x.form, x.mean, y.form, y.mean);
        }
    }
}

#[test]
fn independent_bridges_give_one_over_l() {
    let e = independent_bridge_sigma2(4.0, 100_000, 1024, 7).unwrap();
    assert!((e.mean - 0.25).abs() < 3.0 * e.std_error, "{} ± {}", e.mean, e.std_error);
}

#[test]
fn identical_bridges_stay_order_one() {
    let means: Vec<f64> = [8.0, 32.0, 128.0]
        .iter()
        .map(|&l| identical_bridge_sigma2(l, 20_000, (8.0 * l) as usize, 3).unwrap().mean)
        .collect();
    let hi = means.iter().copied().fold(f64::MIN, f64::max);
    let lo = means.iter().copied().fold(f64::MAX, f64::min);
    assert!(hi / lo < 3.0, "{means:?}");
}

#[test]
fn exponent_formula() {
    assert!((predicted_exponent(0.0).unwrap() + 1.0).abs() < 1e-15);
    assert!((predicted_exponent(0.5).unwrap() + 0.5).abs() < 1e-15);
    let r = std::f64::consts::FRAC_PI_4.cos();
    assert!((predicted_exponent(r).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert!(predicted_exponent(1.0 - 1e-12).unwrap().abs() < 1e-5);
    assert!(predicted_exponent(1.0).is_err());
    assert!(estimate_sigma2_r(8.0, 1.0, 1000, 64, 1).is_err());
}

#[test]
fn quadrupling_samples_halves_error() {
    let small = estimate_sigma2(8.0, 4_000, 64, EstimatorForm::Definition, 11).unwrap();
    let large = estimate_sigma2(8.0, 16_000, 64, EstimatorForm::Definition, 12).unwrap();
    let ratio = large.std_error / small.std_error;
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn antithetic_pairs_are_unbiased() {
    let plain = SigmaRun::new(8.0, EstimatorForm::Definition, Coupling::half(), 40_000, 5).with_grid(64).run().unwrap();
    let anti = SigmaRun::new(8.0, EstimatorForm::Definition, Coupling::half(), 40_000, 6)
        .with_grid(64)
        .with_antithetic(true)
        .run()
        .unwrap();
    assert!((plain.mean - anti.mean).abs() < 4.0 * plain.std_error.hypot(anti.std_error));
}

#[test]
fn general_r_matches_half_coupling() {
    let a = estimate_sigma2_r(8.0, 0.5, 50_000, 64, 1).unwrap();
    let b = estimate_sigma2(8.0, 50_000, 64, EstimatorForm::Definition, 2).unwrap();
    assert!((a.mean - b.mean).abs() < 4.0 * a.std_error.hypot(b.std_error));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn integrands_are_positive_and_bounded(
        l in 0.5f64..600.0,
        n in 4usize..200,
        r in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let (u1, u2) = sample_correlated_pair(l, n, CorrelationSpec::new(r).unwrap(), seed).unwrap();
        let dx = l / n as f64;
        let d = definition_integrand(u1.values(), u2.values(), dx);
        let s = shifted_integrand(u1.values(), u2.values(), dx, l);
        prop_assert!(d > 0.0 && d.is_finite());
        prop_assert!(s > 0.0 && s.is_finite());
        prop_assert!(s <= shifted_bound(u1.values(), u2.values(), l) * (1.0 + 1e-12));
    }
}
