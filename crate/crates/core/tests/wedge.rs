use std::f64::consts::{FRAC_PI_3, PI};

use kpzlab::bridges::{Point, H};
use kpzlab::quadrature::GaussLegendre;
use kpzlab::wedge::bessel::{bessel_i, bessel_i_series, sandwich_bounds};
use kpzlab::wedge::{
    bridge_stay_probability, conditional_abs_moment, free_kernel, stay_probability_mc, survival_probability,
    wedge_kernel, wedge_kernel_series, KernelQuery, MonteCarloGrid, WedgePoint,
};
use proptest::prelude::*;

fn wp(r: f64, theta: f64) -> WedgePoint {
    WedgePoint::new(r, theta).unwrap()
}

fn kernel(x: f64, a: WedgePoint, b: WedgePoint) -> f64 {
    wedge_kernel_series(x, a, b).unwrap().value()
}

/// ∫_N f(w) dw in polar coordinates, radially graded towards the apex.
fn wedge_integral(r_max: f64, f: impl Fn(WedgePoint) -> f64) -> f64 {
    let gl = GaussLegendre::new(20);
    let mut edges = vec![0.0];
    let mut e = 0.05;
    while e < 1.0 {
        edges.push(e);
        e *= 1.6;
    }
    let mut r = 1.0;
    while r < r_max {
        edges.push(r);
        r += 0.5;
    }
    edges.push(r_max);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += gl.integrate(w[0], w[1], |r| {
            r * gl.integrate_composite(-FRAC_PI_3, FRAC_PI_3, 4, |t| f(wp(r, t)))
        });
    }
    total
}

#[test]
fn chapman_kolmogorov_at_unit_times() {
    let pairs = [((1.0, 0.1), (0.7, -0.4)), ((1.5, 0.5), (0.3, 0.0)), ((0.5, -0.2), (2.0, 0.3))];
    for ((r1, t1), (r2, t2)) in pairs {
        let (u, v) = (wp(r1, t1), wp(r2, t2));
        let direct = kernel(2.0, u, v);
        let composed = wedge_integral(14.0, |w| kernel(1.0, u, w) * kernel(1.0, w, v));
        assert!((composed - direct).abs() < 1e-6, "{composed} vs {direct}");
    }
}

#[test]
fn mass_is_sub_markov() {
    for (r, t, x) in [(0.5f64, 0.0, 1.0f64), (1.0, 0.3, 0.5), (3.0, -0.2, 2.0), (0.1, 0.9, 1.0)] {
        let u = wp(r, t);
        let mass = wedge_integral(r + 14.0 * x.sqrt(), |w| kernel(x, u, w));
        assert!(mass <= 1.0 + 1e-9 && mass > 0.0, "mass {mass}");
    }
}

#[test]
fn diagonal_formula_matches_series() {
    // p_x^N(−ah, −ah) = (1/x) e^{−q} Σ_j I_{3j/2}(q) sin²(jπ/2), q = 2a²/(3x)
    for (a, x) in [(0.5, 1.0), (1.0, 2.0), (2.0, 1.0), (3.0, 0.7)] {
        let q = 2.0 * a * a / (3.0 * x);
        let mut sum = 0.0;
        for j in (1..=133).step_by(2) {
            sum += bessel_i(1.5 * j as f64, q).unwrap() * (-q).exp();
        }
        let oracle = sum * 3.0 / (PI * x);
        let u = Point::new(0.0, 0.0);
        let got = wedge_kernel(&KernelQuery::offset(x, u, u, a)).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle, "{got} vs {oracle}");
    }
}

#[test]
fn survival_limits_and_monotonicity() {
    assert_eq!(survival_probability(0.0, 10.0).unwrap(), 0.0);
    assert_eq!(survival_probability(f64::INFINITY, 10.0).unwrap(), 1.0);
    assert!(survival_probability(1e-3, 10.0).unwrap() < 1e-6);
    let mut last = 0.0;
    for a in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let p = survival_probability(a, 16.0).unwrap();
        assert!(p > last && p <= 1.0);
        last = p;
    }
}

#[test]
fn bessel_basics() {
    assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
    assert_eq!(bessel_i(1.5, 0.0).unwrap(), 0.0);
    for z in [0.5, 1.0, 5.0] {
        let exact = (2.0 / (PI * z)).sqrt() * z.sinh();
        let got = bessel_i(0.5, z).unwrap();
        assert!((got - exact).abs() <= 1e-10 * exact);
    }
}

#[test]
fn bessel_sandwich_with_gamma_nu_plus_one() {
    for nu in [1.5, 3.0, 7.5] {
        for z in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let i = bessel_i_series(nu, z).unwrap();
            let (lo, hi) = sandwich_bounds(nu, z);
            assert!(lo <= i && i <= hi, "nu={nu} z={z}");
        }
    }
}

#[test]
fn gamma_nu_plus_half_variant_loses_the_lower_bound() {
    // with Γ(ν+½) in place of Γ(ν+1) the upper bound survives but the lower
    // bound fails for small z
    let mut lower_broken = 0;
    for nu in [1.5, 3.0, 7.5] {
        for z in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let i = bessel_i_series(nu, z).unwrap();
            let scale = (0.5 * z).powf(nu) / libm::tgamma(nu + 0.5);
            assert!(i <= scale * z.exp());
            if i < scale * (-z).exp() {
                lower_broken += 1;
            }
        }
    }
    assert!(lower_broken > 0);
    let i = bessel_i_series(1.5, 0.1).unwrap();
    assert!(i < (0.05f64).powf(1.5) * (-0.1f64).exp() / libm::tgamma(2.0));
}

#[test]
fn bridge_stay_matches_monte_carlo() {
    let (q, j) = (1.0, 16.0);
    let w = Point::new(0.3, 0.1);
    let exact = bridge_stay_probability(q, j, w).unwrap();
    let grid = MonteCarloGrid::per_unit(j, 16);
    let mc = stay_probability_mc(w, Point::new(0.0, 0.0), j, q, grid, 200_000, 17).unwrap();
    assert!(mc.consistent_with(exact, 3.0), "exact {exact}, fine {:?}, margin {}", mc.fine, mc.margin());
    assert_eq!(bridge_stay_probability(q, j, H * q + Point::from_polar(0.5, FRAC_PI_3)).unwrap(), 0.0);
}

#[test]
fn grid_doubling_moves_toward_series() {
    for (a, l, per_unit) in [(2.0, 16.0, 4), (3.0, 64.0, 2)] {
        let exact = survival_probability(a, l).unwrap();
        let o = Point::new(0.0, 0.0);
        let mc = stay_probability_mc(o, o, l, a, MonteCarloGrid::per_unit(l, per_unit), 100_000, 5).unwrap();
        assert!(mc.coarse.p() > mc.fine.p() && mc.fine.p() > exact, "{} {} {exact}", mc.coarse.p(), mc.fine.p());
    }
}

#[test]
fn conditional_moment_bounds_and_symmetry() {
    let e = conditional_abs_moment(1.0, 8.0, 20_000, 1).unwrap();
    assert!(e.mean >= 0.0);
    let (a, b) = (conditional_abs_moment(3.0, 16.0, 40_000, 2).unwrap(), conditional_abs_moment(13.0, 16.0, 40_000, 3).unwrap());
    assert!((a.mean - b.mean).abs() <= 3.0 * a.std_error.hypot(b.std_error));
    for l in [8.0, 16.0, 32.0] {
        let e = conditional_abs_moment(l / 2.0, l, 40_000, 4).unwrap();
        assert!(e.mean / (l / 2.0).sqrt() <= 10.0);
    }
}

fn interior() -> impl Strategy<Value = WedgePoint> {
    (0.01f64..4.0, -0.999f64..0.999).prop_map(|(r, t)| wp(r, t * FRAC_PI_3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_is_symmetric(x in 0.05f64..5.0, a in interior(), b in interior()) {
        let (p, q) = (kernel(x, a, b), kernel(x, b, a));
        prop_assert!((p - q).abs() <= 1e-12 * p.max(q) + 1e-300);
    }

    #[test]
    fn kernel_is_dominated_by_free_kernel(x in 0.05f64..5.0, a in interior(), b in interior()) {
        let p = kernel(x, a, b);
        prop_assert!(p >= 0.0);
        prop_assert!(p <= free_kernel(x, a.to_point(), b.to_point()) * (1.0 + 1e-10));
    }

    #[test]
    fn kernel_vanishes_on_the_boundary(x in 0.05f64..5.0, a in interior(), r in 0.0f64..4.0, up in any::<bool>()) {
        let edge = wp(r, if up { FRAC_PI_3 } else { -FRAC_PI_3 });
        prop_assert_eq!(kernel(x, a, edge), 0.0);
    }

    #[test]
    fn tail_bound_covers_ten_more_terms(x in 0.05f64..5.0, a in interior(), b in interior()) {
        let s = wedge_kernel_series(x, a, b).unwrap();
        let q = a.r() * b.r() / x;
        let (p1, p2) = (1.5 * (a.theta() + FRAC_PI_3), 1.5 * (b.theta() + FRAC_PI_3));
        let extra: f64 = (s.terms + 1..=s.terms + 10)
            .map(|j| {
                let jf = j as f64;
                bessel_i(1.5 * jf, q).unwrap() * (-q).exp() * (jf * p1).sin() * (jf * p2).sin()
            })
            .sum();
        prop_assert!(extra.abs() <= s.tail_bound + 1e-300, "extra {} bound {}", extra, s.tail_bound);
    }

    #[test]
    fn probabilities_lie_in_unit_interval(q in 0.1f64..3.0, j in 0.5f64..40.0, r in 0.0f64..3.0, t in -1.0f64..1.0) {
        let w = H * q + Point::from_polar(r, t * FRAC_PI_3);
        let p = bridge_stay_probability(q, j, w).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let s = survival_probability(q, j).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }
}
