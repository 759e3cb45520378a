//! Brownian bridges on uniform grids and the path functionals built on them.
//!
//! Bridges are built as cumulative sums of Gaussian increments minus the
//! linear endpoint correction, which is exact in law at the grid points.
//! Planar quantities use complex numbers as points of the plane.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::rng::SeedStream;

/// A point of the plane.
pub type Point = Complex64;

/// v₁ = −√2·e^{−iπ/6}.
pub const V1: Point = Point::new(-1.224_744_871_391_589, 0.707_106_781_186_547_6);
/// v₂ = −√2·e^{iπ/6}.
pub const V2: Point = Point::new(-1.224_744_871_391_589, -0.707_106_781_186_547_6);
/// Offset between nested wedges: v₁·h = v₂·h = 1.
pub const H: Point = Point::new(-0.816_496_580_927_726, 0.0);

/// Euclidean dot product of two planar points.
#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a.re * b.re + a.im * b.im
}

/// ω(v) = max(v₁·v, v₂·v).
#[inline]
pub fn omega(v: Point) -> f64 {
    dot(V1, v).max(dot(V2, v))
}

/// A Brownian-bridge sample on `n + 1` equally spaced points of [0, L].
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    length: f64,
    values: Vec<f64>,
}

impl BridgePath {
    /// Wraps grid values; both endpoints must be zero.
    pub fn from_values(length: f64, values: Vec<f64>) -> Result<Self> {
        check_grid(length, values.len().saturating_sub(1))?;
        ensure(values[0] == 0.0 && values[values.len() - 1] == 0.0, || {
            "bridge values must vanish at both endpoints".into()
        })?;
        Ok(Self { length, values })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Abscissa of grid point `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.length * i as f64 / self.n() as f64
    }
}

fn check_grid(length: f64, n: usize) -> Result<()> {
    ensure(length.is_finite() && length > 0.0, || {
        format!("bridge length must be positive and finite, got {length}")
    })?;
    ensure(n >= 2, || format!("grid needs at least 2 intervals, got {n}"))
}

/// Fills `out` (length n + 1) with a standard bridge on [0, length].
pub fn fill_bridge<R: Rng + ?Sized>(rng: &mut R, length: f64, out: &mut [f64]) {
    let n = out.len() - 1;
    let sd = (length / n as f64).sqrt();
    let mut w = 0.0;
    out[0] = 0.0;
    for v in out[1..].iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        w += sd * z;
        *v = w;
    }
    let end = out[n];
    let inv_n = 1.0 / n as f64;
    for (i, v) in out.iter_mut().enumerate() {
        *v -= end * (i as f64 * inv_n);
    }
    out[n] = 0.0;
}

/// Samples a standard Brownian bridge on [0, L] at `n + 1` grid points.
pub fn sample_bridge(length: f64, n: usize, seed: u64) -> Result<BridgePath> {
    check_grid(length, n)?;
    let mut rng = SeedStream::new(seed).rng(0);
    let mut values = vec![0.0; n + 1];
    fill_bridge(&mut rng, length, &mut values);
    Ok(BridgePath { length, values })
}

/// Scalar correlation r ∈ [0, 1] between two bridges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSpec(f64);

impl CorrelationSpec {
    pub fn new(r: f64) -> Result<Self> {
        ensure((0.0..=1.0).contains(&r), || {
            format!("correlation r must lie in [0, 1], got {r}")
        })?;
        Ok(Self(r))
    }

    pub fn r(&self) -> f64 {
        self.0
    }

    /// Weights (a, b) in U_k = a·B_k + b·B₃.
    pub fn weights(&self) -> (f64, f64) {
        ((2.0 * (1.0 - self.0)).sqrt(), (2.0 * self.0).sqrt())
    }
}

/// Writes U_k = √(2(1−r))·B_k + √(2r)·B₃ for three independent bridges
/// drawn from `rng`. `scratch` must have the same length as the outputs.
pub fn fill_correlated_pair<R: Rng + ?Sized>(
    rng: &mut R,
    length: f64,
    spec: CorrelationSpec,
    u1: &mut [f64],
    u2: &mut [f64],
    scratch: &mut [f64],
) {
    let (a, b) = spec.weights();
    fill_bridge(rng, length, u1);
    fill_bridge(rng, length, u2);
    fill_bridge(rng, length, scratch);
    for ((x, y), c) in u1.iter_mut().zip(u2.iter_mut()).zip(scratch.iter()) {
        *x = a * *x + b * c;
        *y = a * *y + b * c;
    }
}

/// Samples the correlated pair (U₁, U₂): each marginal has variance
/// 2x(L−x)/L and the cross-correlation is r.
pub fn sample_correlated_pair(
    length: f64,
    n: usize,
    spec: CorrelationSpec,
    seed: u64,
) -> Result<(BridgePath, BridgePath)> {
    check_grid(length, n)?;
    let mut rng = SeedStream::new(seed).rng(0);
    let mut u1 = vec![0.0; n + 1];
    let mut u2 = vec![0.0; n + 1];
    let mut scratch = vec![0.0; n + 1];
    fill_correlated_pair(&mut rng, length, spec, &mut u1, &mut u2, &mut scratch);
    Ok((
        BridgePath { length, values: u1 },
        BridgePath { length, values: u2 },
    ))
}

/// Two-component path V = (V₁, V₂) on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPath {
    length: f64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl PlanarPath {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.first.len() - 1
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.first[i], self.second[i])
    }

    /// The scalar bridge v·V for a fixed vector `v`.
    pub fn project(&self, v: Point) -> BridgePath {
        let values = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(&a, &b)| v.re * a + v.im * b)
            .collect();
        BridgePath {
            length: self.length,
            values,
        }
    }

    /// U_k = v_k·V for k = 1, 2.
    pub fn correlated_pair(&self) -> (BridgePath, BridgePath) {
        (self.project(V1), self.project(V2))
    }

    /// Maximum of ω(V(x)) over the grid.
    pub fn max_omega(&self) -> f64 {
        (0..=self.n())
            .map(|i| omega(self.point(i)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples a standard two-dimensional Brownian bridge on [0, L].
pub fn sample_planar_bridge(length: f64, n: usize, seed: u64) -> Result<PlanarPath> {
    check_grid(length, n)?;
    let mut rng = SeedStream::new(seed).rng(0);
    let mut first = vec![0.0; n + 1];
    let mut second = vec![0.0; n + 1];
    fill_bridge(&mut rng, length, &mut first);
    fill_bridge(&mut rng, length, &mut second);
    Ok(PlanarPath {
        length,
        first,
        second,
    })
}

/// Planar Brownian bridge generated one grid step at a time, so callers can
/// stop as soon as a path leaves a region. Each step draws from the exact
/// conditional law given the current position and the pinned endpoint.
#[derive(Debug, Clone)]
pub struct PlanarBridgeWalk {
    end: Point,
    dx: f64,
    n: usize,
    i: usize,
    pos: Point,
}

impl PlanarBridgeWalk {
    pub fn new(start: Point, end: Point, length: f64, n: usize) -> Result<Self> {
        check_grid(length, n)?;
        Ok(Self {
            end,
            dx: length / n as f64,
            n,
            i: 0,
            pos: start,
        })
    }

    /// Index of the current grid point.
    pub fn index(&self) -> usize {
        self.i
    }

    pub fn x(&self) -> f64 {
        self.i as f64 * self.dx
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn position(&self) -> Point {
        self.pos
    }

    pub fn finished(&self) -> bool {
        self.i == self.n
    }

    /// Advances one grid step and returns the new position, or `None` at
    /// the end of the interval.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Point> {
        if self.i == self.n {
            return None;
        }
        let remaining = (self.n - self.i) as f64;
        self.i += 1;
        if self.i == self.n {
            self.pos = self.end;
        } else {
            let mean = self.pos + (self.end - self.pos) / remaining;
            let sd = (self.dx * (remaining - 1.0) / remaining).sqrt();
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            self.pos = mean + Point::new(sd * z1, sd * z2);
        }
        Some(self.pos)
    }
}

/// Exact draw of V(x_next) given V(x) = from for a planar bridge on
/// [0, length] ending at `end`, with x < x_next ≤ length.
pub fn bridge_transition<R: Rng + ?Sized>(
    rng: &mut R,
    from: Point,
    x: f64,
    x_next: f64,
    end: Point,
    length: f64,
) -> Point {
    debug_assert!(x < x_next && x_next <= length);
    let rest = length - x;
    let step = x_next - x;
    if x_next >= length {
        return end;
    }
    let mean = from + (end - from) * (step / rest);
    let sd = (step * (length - x_next) / rest).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    mean + Point::new(sd * z1, sd * z2)
}

/// log ∫ e^{u(x)} dx by the trapezoidal rule on a uniform grid of spacing
/// `dx`, evaluated in log-sum-exp form.
pub fn log_trapezoid_exp(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return f64::NEG_INFINITY;
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inner: f64 = values[1..n - 1].iter().map(|v| (v - m).exp()).sum();
    let ends = 0.5 * ((values[0] - m).exp() + (values[n - 1] - m).exp());
    m + (dx * (inner + ends)).ln()
}

/// log of the trapezoidal approximation of ∫₀^L e^{path(x)} dx.
pub fn log_exp_integral(path: &BridgePath) -> f64 {
    log_trapezoid_exp(&path.values, path.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_at_both_ends() {
        for seed in 0..20 {
            let b = sample_bridge(3.7, 17, seed).unwrap();
            assert_eq!(b.values()[0], 0.0);
            assert_eq!(b.values()[17], 0.0);
            assert!((b.spacing() - 3.7 / 17.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(sample_bridge(0.0, 10, 1).is_err());
        assert!(sample_bridge(-1.0, 10, 1).is_err());
        assert!(sample_bridge(1.0, 1, 1).is_err());
        assert!(sample_planar_bridge(f64::NAN, 10, 1).is_err());
        assert!(CorrelationSpec::new(1.5).is_err());
        assert!(CorrelationSpec::new(-0.1).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(sample_bridge(4.0, 64, 9).unwrap(), sample_bridge(4.0, 64, 9).unwrap());
        assert_ne!(sample_bridge(4.0, 64, 9).unwrap(), sample_bridge(4.0, 64, 10).unwrap());
    }

    #[test]
    fn fully_correlated_pair_is_identical() {
        let spec = CorrelationSpec::new(1.0).unwrap();
        let (a, b) = sample_correlated_pair(8.0, 100, spec, 3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega(Point::new(0.0, 0.0)), 0.0);
        assert!((omega(Point::new(1.0, 0.0)) + 6f64.sqrt() / 2.0).abs() < 1e-15);
        for a in [1.0, 2.5, -3.0] {
            assert!((omega(H * a) - a).abs() < 1e-14);
        }
        assert!((dot(V1, H) - 1.0).abs() < 1e-15);
        assert!((dot(V2, H) - 1.0).abs() < 1e-15);
        assert!((V1.norm_sqr() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constants_match_polar_form() {
        let e = |t: f64| Point::from_polar(1.0, t);
        let s = -(2f64.sqrt());
        assert!((V1 - s * e(-std::f64::consts::PI / 6.0)).norm() < 1e-15);
        assert!((V2 - s * e(std::f64::consts::PI / 6.0)).norm() < 1e-15);
    }

    #[test]
    fn trapezoid_of_constants_is_exact() {
        let l = 5.0;
        let zero = vec![0.0; 33];
        assert!((log_trapezoid_exp(&zero, l / 32.0) - l.ln()).abs() < 1e-14);
        let c = vec![2.5; 33];
        assert!((log_trapezoid_exp(&c, l / 32.0) - (2.5 + l.ln())).abs() < 1e-14);
        let huge = vec![1000.0; 33];
        assert!((log_trapezoid_exp(&huge, l / 32.0) - (1000.0 + l.ln())).abs() < 1e-12);
    }

    #[test]
    fn planar_projection_and_omega_agree() {
        let v = sample_planar_bridge(6.0, 200, 11).unwrap();
        let (u1, u2) = v.correlated_pair();
        let max_pair = u1
            .values()
            .iter()
            .zip(u2.values())
            .map(|(a, b)| a.max(*b))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max_pair, v.max_omega());
    }

    #[test]
    fn walk_hits_endpoint() {
        let mut rng = SeedStream::new(5).rng(0);
        let end = Point::new(0.3, -0.2);
        let mut w = PlanarBridgeWalk::new(Point::new(1.0, 1.0), end, 2.0, 10).unwrap();
        let mut last = None;
        while let Some(p) = w.step(&mut rng) {
            last = Some(p);
        }
        assert_eq!(last, Some(end));
        assert!(w.finished());
    }
}
