use std::f64::consts::{FRAC_PI_3, PI};

use kpzlab::bridges::{omega, sample_planar_bridge, Point, H};
use kpzlab::harmonic::{arctan_tail, conformal_map, sample_hit_law, simulate_first_hit};
use proptest::prelude::*;

#[test]
fn tail_reference_points() {
    let hn = H.norm();
    assert_eq!(arctan_tail(1.0, hn), 0.5);
    let expect = 2.0 / PI * 2f64.powf(-1.5).atan();
    assert!((arctan_tail(1.0, 2.0 * hn) - expect).abs() < 1e-15);
}

#[test]
fn hits_sit_on_the_shifted_boundary() {
    let (l, q) = (16.0, 1.0);
    for seed in 0..50 {
        let h = simulate_first_hit(l, q, 2048, seed).unwrap();
        assert!((omega(h.location) - q).abs() < 1e-9);
        assert!(h.tau > 0.0 && h.tau < l);
        assert!((h.tau - l * h.kappa / (l + h.kappa)).abs() <= 1e-12 * l);
        assert!((h.raw - h.location * (1.0 - h.tau / l)).norm() < 1e-12);
    }
}

#[test]
fn hit_law_tails_match_arctan() {
    let (l, q) = (64.0, 1.0);
    let law = sample_hit_law(l, q, 4096, 20_000, 21).unwrap();
    for xi in [0.5, 1.0, 2.0, 4.0] {
        let (p, se) = law.empirical_tail(xi);
        let margin = (law.coarse_tail(xi) - p).abs() / (2f64.sqrt() - 1.0);
        assert!((p - arctan_tail(q, xi)).abs() <= 3.0 * se + margin, "xi={xi}: {p}");
        // |V(τ)| sits inside the scaled location, so its tail is lighter
        assert!(law.raw_tail(xi) <= arctan_tail(q, xi) + 3.0 * se);
    }
}

#[test]
fn crossing_time_agrees_with_direct_bridge_clock() {
    // first crossing found on a uniform grid in x for the same process
    let (l, q, n) = (8.0, 1.0, 8192);
    let mut direct = Vec::new();
    for seed in 0..4000u64 {
        let p = sample_planar_bridge(l, n, 1_000_000 + seed).unwrap();
        let dx = l / n as f64;
        let hit = (1..n).find(|&i| {
            let x = i as f64 * dx;
            omega(p.point(i) / (1.0 - x / l)) >= q
        });
        direct.push(hit.map_or(l, |i| i as f64 * dx));
    }
    let law = sample_hit_law(l, q, 4096, 4000, 5).unwrap();
    let mut sim: Vec<f64> = law.fine.iter().map(|h| h.tau).collect();
    sim.extend(std::iter::repeat(l).take(law.fine_misses));
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n * (n - 1.0))).sqrt())
    };
    let ((m1, s1), (m2, s2)) = (stats(&direct), stats(&sim));
    assert!((m1 - m2).abs() < 4.0 * s1.hypot(s2), "{m1} vs {m2}");
}

proptest! {
    #[test]
    fn tail_is_a_survival_function(q in 0.1f64..5.0, a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        let (p_lo, p_hi) = (arctan_tail(q, lo), arctan_tail(q, hi));
        prop_assert!(p_hi <= p_lo);
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
    }

    #[test]
    fn map_scales_angles_by_three_halves(q in 0.1f64..5.0, r in 0.01f64..10.0, t in -1.0f64..1.0) {
        let theta = t * FRAC_PI_3;
        let z = H * q + Point::from_polar(r, theta);
        let w = conformal_map(z, q).unwrap();
        prop_assert!((w.arg() - 1.5 * theta).abs() < 1e-9);
        prop_assert!((w.norm() - r.powf(1.5)).abs() < 1e-9 * r.powf(1.5).max(1.0));
    }

    #[test]
    fn time_change_is_increasing(l in 0.5f64..100.0, y1 in 0.0f64..1e6, y2 in 0.0f64..1e6) {
        let x = |y: f64| l * y / (l + y);
        let (a, b) = (y1.min(y2), y1.max(y2));
        prop_assert!(x(a) <= x(b) && x(b) < l && x(a) >= 0.0);
    }
}
