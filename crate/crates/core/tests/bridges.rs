use kpzlab::bridges::{
    log_exp_integral, omega, sample_bridge, sample_correlated_pair, sample_planar_bridge, BridgePath,
    CorrelationSpec, Point, H,
};
use proptest::prelude::*;

/// Mean and standard error of a sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn midpoint_variance_at_l4() {
    let (l, n) = (4.0, 256);
    let sq: Vec<f64> = (0..100_000u64).map(|s| sample_bridge(l, n, s).unwrap().values()[n / 2].powi(2)).collect();
    let (m, se) = mean_se(&sq);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn covariance_and_gaussian_moments() {
    let (l, n, reps) = (4.0, 16, 40_000u64);
    let paths: Vec<BridgePath> = (0..reps).map(|s| sample_bridge(l, n, 1_000_000 + s).unwrap()).collect();
    for (i, j) in [(2, 5), (4, 12), (8, 8), (1, 15)] {
        let (s, t) = (paths[0].x(i), paths[0].x(j));
        let prods: Vec<f64> = paths.iter().map(|p| p.values()[i] * p.values()[j]).collect();
        let (m, se) = mean_se(&prods);
        let exact = s.min(t) - s * t / l;
        assert!((m - exact).abs() < 4.0 * se, "cov({s},{t}) = {m} vs {exact}");
    }
    let x: Vec<f64> = paths.iter().map(|p| p.values()[6]).collect();
    let m2 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / x.len() as f64;
    assert!((m4 / (m2 * m2) - 3.0).abs() < 0.15, "kurtosis {}", m4 / (m2 * m2));
}

#[test]
fn correlated_pairs() {
    let (l, n, reps) = (4.0, 8, 40_000u64);
    let one = CorrelationSpec::new(1.0).unwrap();
    let (a, b) = sample_correlated_pair(l, n, one, 3).unwrap();
    assert_eq!(a, b);

    let half = CorrelationSpec::new(0.5).unwrap();
    let zero = CorrelationSpec::new(0.0).unwrap();
    let i = 3;
    let mut cov_half = Vec::new();
    let mut cov_zero = Vec::new();
    for s in 0..reps {
        let (u1, u2) = sample_correlated_pair(l, n, half, s).unwrap();
        cov_half.push(u1.values()[i] * u2.values()[i]);
        let (w1, w2) = sample_correlated_pair(l, n, zero, s + reps).unwrap();
        cov_zero.push(w1.values()[i] * w2.values()[i]);
    }
    let x = u1x(l, n, i);
    let (m, se) = mean_se(&cov_half);
    assert!((m - x * (l - x) / l).abs() < 3.0 * se);
    let (m, se) = mean_se(&cov_zero);
    assert!(m.abs() < 3.0 * se);
}

fn u1x(l: f64, n: usize, i: usize) -> f64 {
    l * i as f64 / n as f64
}

#[test]
fn planar_bridge_projections() {
    let (l, n, reps) = (4.0, 8, 40_000u64);
    let i = 2;
    let x = u1x(l, n, i);
    let mut cross = Vec::new();
    let mut proj = [Vec::new(), Vec::new()];
    for s in 0..reps {
        let p = sample_planar_bridge(l, n, s).unwrap();
        cross.push(p.first()[i] * p.second()[i]);
        let (u1, u2) = p.correlated_pair();
        proj[0].push(u1.values()[i].powi(2));
        proj[1].push(u2.values()[i].powi(2));
        let max_direct = (0..=n).map(|k| u1.values()[k].max(u2.values()[k])).fold(f64::MIN, f64::max);
        assert!((p.max_omega() - max_direct).abs() < 1e-12);
    }
    let (m, se) = mean_se(&cross);
    assert!(m.abs() < 3.0 * se);
    for v in &proj {
        let (m, se) = mean_se(v);
        assert!((m - 2.0 * x * (l - x) / l).abs() < 3.0 * se);
    }
}

#[test]
fn planar_projection_reproduces_correlated_pair_law() {
    let (l, n, reps) = (4.0, 8, 30_000u64);
    let half = CorrelationSpec::new(0.5).unwrap();
    let stats = |f: &dyn Fn(u64) -> (BridgePath, BridgePath)| {
        let mut a = [Vec::new(), Vec::new(), Vec::new()];
        for s in 0..reps {
            let (u1, u2) = f(s);
            a[0].push(u1.values()[3]);
            a[1].push(u1.values()[5] * u2.values()[5]);
            a[2].push(u2.values()[2].powi(2));
        }
        a.map(|v| mean_se(&v))
    };
    let direct = stats(&|s| sample_correlated_pair(l, n, half, s).unwrap());
    let planar = stats(&|s| sample_planar_bridge(l, n, 500_000 + s).unwrap().correlated_pair());
    for ((m1, s1), (m2, s2)) in direct.iter().zip(&planar) {
        assert!((m1 - m2).abs() < 4.0 * s1.hypot(*s2), "{m1} vs {m2}");
    }
}

#[test]
fn omega_examples() {
    assert_eq!(omega(Point::new(0.0, 0.0)), 0.0);
    for a in [1.0, 2.5, -3.0] {
        assert!((omega(H * a) - a).abs() < 1e-15);
    }
    assert!((omega(Point::new(1.0, 0.0)) + 6f64.sqrt() / 2.0).abs() < 1e-15);
}

#[test]
fn log_exp_integral_constants_and_refinement() {
    let l = 4.0;
    let zero = BridgePath::from_values(l, vec![0.0; 17]).unwrap();
    assert!((log_exp_integral(&zero) - l.ln()).abs() < 1e-15);

    // refinement n → 2n changes the value by O(1/n) on average: the O(h²)
    // convexity bias and the O(h^{3/2}) fluctuations of n cells both sum to O(h)
    let sub = |p: &BridgePath, k: usize| {
        let v: Vec<f64> = p.values().iter().step_by(k).copied().collect();
        log_exp_integral(&BridgePath::from_values(l, v).unwrap())
    };
    let mut diffs = [0.0; 3];
    for s in 0..2000 {
        let p = sample_bridge(l, 1024, s).unwrap();
        for (d, k) in diffs.iter_mut().zip([16, 8, 4]) {
            *d += (sub(&p, k) - sub(&p, k / 2)).abs();
        }
    }
    for w in diffs.windows(2) {
        let rate = (w[1] / w[0]).log2();
        assert!((rate + 1.0).abs() < 0.25, "rate {rate}");
    }
}

#[test]
fn deterministic_paths() {
    assert_eq!(sample_bridge(8.0, 64, 42).unwrap(), sample_bridge(8.0, 64, 42).unwrap());
    assert_ne!(sample_bridge(8.0, 64, 42).unwrap(), sample_bridge(8.0, 64, 43).unwrap());
    let a = sample_planar_bridge(8.0, 64, 1).unwrap();
    let b = sample_planar_bridge(8.0, 64, 1).unwrap();
    assert_eq!(a.first(), b.first());
    assert_eq!(a.second(), b.second());
}

proptest! {
    #[test]
    fn bridges_are_pinned(l in 0.1f64..100.0, n in 2usize..300, seed in any::<u64>()) {
        let p = sample_bridge(l, n, seed).unwrap();
        prop_assert_eq!(p.values()[0], 0.0);
        prop_assert_eq!(p.values()[n], 0.0);
        let planar = sample_planar_bridge(l, n, seed).unwrap();
        prop_assert_eq!(planar.point(0), Point::new(0.0, 0.0));
        prop_assert_eq!(planar.point(n), Point::new(0.0, 0.0));
    }

    #[test]
    fn omega_shift_identity(x in -50.0f64..50.0, y in -50.0f64..50.0, a in -20.0f64..20.0) {
        let v = Point::new(x, y);
        prop_assert!((omega(v + H * a) - omega(v) - a).abs() <= 1e-12 * (1.0 + v.norm() + a.abs()));
    }

    #[test]
    fn constant_shift_adds_to_log_integral(c in -30.0f64..30.0, seed in any::<u64>()) {
        let p = sample_bridge(3.0, 64, seed).unwrap();
        let base = log_exp_integral(&p);
        let flat = BridgePath::from_values(3.0, vec![0.0; 65]).unwrap();
        prop_assert!((log_exp_integral(&flat) - 3f64.ln()).abs() < 1e-14);
        let shifted: Vec<f64> = p.values().iter().map(|v| v + c).collect();
        let s = kpzlab::bridges::log_trapezoid_exp(&shifted, p.spacing());
        prop_assert!((s - base - c).abs() < 1e-10);
    }
}
