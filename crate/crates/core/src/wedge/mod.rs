//! Planar Brownian motion killed on the boundary of the wedge
//! N = {r e^{iθ} : |θ| ≤ π/3} and its translates N_a = N + a·h.
//!
//! N_a is exactly the set {ω ≤ a}, so "the bridge stays in N_a" and
//! "max ω(V) ≤ a" are the same event.

pub mod bessel;
mod barrier;
mod montecarlo;

pub use barrier::{barrier_profile, smooth_cutoff};
pub use montecarlo::{
    conditional_abs_moment, entropic_repulsion, stay_probability_mc, ConditionalEstimate,
    GridStayEstimate, MonteCarloGrid, RepulsionEstimate,
};

use std::f64::consts::{FRAC_PI_3, PI};

use crate::bridges::{omega, Point, H};
use crate::error::{ensure, invalid, Error, Result};

/// Maximum number of series terms.
pub const J_MAX: usize = 500;
/// Relative truncation target for the series tail.
pub const TAIL_TOL: f64 = 1e-12;

/// |h| = √6/3.
pub fn h_norm() -> f64 {
    H.norm()
}

/// A point of N in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgePoint {
    r: f64,
    theta: f64,
}

impl WedgePoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        ensure(r >= 0.0 && r.is_finite(), || format!("radius must be non-negative, got {r}"))?;
        ensure(theta.abs() <= FRAC_PI_3 * (1.0 + 1e-12), || {
            format!("angle {theta} outside [-pi/3, pi/3]")
        })?;
        Ok(Self { r, theta: theta.clamp(-FRAC_PI_3, FRAC_PI_3) })
    }

    /// Polar form of a Cartesian point; fails if it lies outside N.
    pub fn from_point(p: Point) -> Result<Self> {
        let r = p.norm();
        if r == 0.0 {
            return Ok(Self { r: 0.0, theta: 0.0 });
        }
        Self::new(r, p.arg()).map_err(|_| invalid(format!("point {p} lies outside the wedge")))
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_point(&self) -> Point {
        Point::from_polar(self.r, self.theta)
    }

    /// Angle measured from the lower edge and stretched to [0, π].
    fn phase(&self) -> f64 {
        1.5 * (self.theta + FRAC_PI_3)
    }

    fn on_boundary(&self) -> bool {
        self.r == 0.0 || self.theta.abs() >= FRAC_PI_3
    }
}

/// A transition density query p_x^{N_a}(u₁, u₂). `a = ∞` means no killing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub x: f64,
    pub u1: Point,
    pub u2: Point,
    pub a: f64,
}

impl KernelQuery {
    /// Query for the wedge N itself.
    pub fn wedge(x: f64, u1: Point, u2: Point) -> Self {
        Self { x, u1, u2, a: 0.0 }
    }

    pub fn offset(x: f64, u1: Point, u2: Point, a: f64) -> Self {
        Self { x, u1, u2, a }
    }

    pub fn free(x: f64, u1: Point, u2: Point) -> Self {
        Self { x, u1, u2, a: f64::INFINITY }
    }
}

/// Series evaluation of p_x^N with its certified truncation bound.
///
/// The density is `exp(log_prefactor) * series`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSeries {
    pub log_prefactor: f64,
    pub series: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

impl KernelSeries {
    pub fn value(&self) -> f64 {
        if self.series <= 0.0 {
            return 0.0;
        }
        (self.log_prefactor + self.series.ln()).exp()
    }

    fn zero() -> Self {
        Self { log_prefactor: f64::NEG_INFINITY, series: 0.0, tail_bound: 0.0, terms: 0 }
    }
}

/// Free planar heat kernel (2πx)^{-1} e^{-|u₁-u₂|²/(2x)}.
pub fn free_kernel(x: f64, u1: Point, u2: Point) -> f64 {
    (-(u1 - u2).norm_sqr() / (2.0 * x)).exp() / (2.0 * PI * x)
}

/// Majorant of Σ_{j>J} j² (q/2)^{3j/2}/Γ(3j/2+1), or +∞ while the term
/// ratio is still ≥ 1.
fn tail_majorant(q: f64, last: usize) -> f64 {
    let lq = (0.5 * q).ln();
    let log_c = |j: f64| 2.0 * j.ln() + 1.5 * j * lq - libm::lgamma(1.5 * j + 1.0);
    let j = (last + 1) as f64;
    let first = log_c(j);
    let ratio = (log_c(j + 1.0) - first).exp();
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    first.exp() / (1.0 - ratio)
}

/// p_x^N(w₁, w₂) for two points of N given in polar form.
///
/// Terms e^{-q} I_{3j/2}(q) sin(jφ₁) sin(jφ₂), q = r₁r₂/x, are added until
/// the bound |sin jφ| ≤ j|sin φ| together with e^{-q}I_ν(q) ≤ (q/2)^ν/Γ(ν+1)
/// certifies the rest of the series below [`TAIL_TOL`] of the partial sum.
pub fn wedge_kernel_series(x: f64, w1: WedgePoint, w2: WedgePoint) -> Result<KernelSeries> {
    ensure(x > 0.0 && x.is_finite(), || format!("time must be positive, got {x}"))?;
    if w1.on_boundary() || w2.on_boundary() {
        return Ok(KernelSeries::zero());
    }
    let q = w1.r * w2.r / x;
    if q > bessel::Z_MAX {
        return Err(Error::OutOfRange(format!(
            "kernel argument r1*r2/x = {q} exceeds {}",
            bessel::Z_MAX
        )));
    }
    let (p1, p2) = (w1.phase().min(w2.phase()), w1.phase().max(w2.phase()));
    let s = (p1.sin() * p2.sin()).abs();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut tail = f64::INFINITY;
    for j in 1..=J_MAX {
        let nu = 1.5 * j as f64;
        let scaled = (bessel::log_series_unchecked(nu, q) - q).exp();
        let jf = j as f64;
        let term = scaled * (jf * p1).sin() * (jf * p2).sin();
        sum += term;
        abs_sum += term.abs();
        tail = s * tail_majorant(q, j);
        if tail <= TAIL_TOL * sum.abs() || tail < 1e-300 {
            // below the rounding floor the partial sum is noise; keep it
            // inside 0 ≤ p ≤ free kernel
            if abs_sum * f64::EPSILON * jf > 1e-10 * sum.abs() {
                let ceiling = (-q * (1.0 - (w1.theta - w2.theta).cos())).exp() / 6.0;
                sum = sum.clamp(0.0, ceiling);
            }
            return Ok(KernelSeries {
                log_prefactor: (3.0 / (PI * x)).ln() - (w1.r - w2.r).powi(2) / (2.0 * x),
                series: sum,
                tail_bound: tail,
                terms: j,
            });
        }
    }
    Err(Error::ConvergenceFailure { partial_sum: sum, tail_bound: tail, terms: J_MAX })
}

/// Killed transition density p_x^{N_a}(u₁, u₂).
pub fn wedge_kernel(q: &KernelQuery) -> Result<f64> {
    ensure(q.x > 0.0 && q.x.is_finite(), || format!("time must be positive, got {}", q.x))?;
    if q.a == f64::INFINITY {
        return Ok(free_kernel(q.x, q.u1, q.u2));
    }
    ensure(q.a.is_finite(), || format!("invalid wedge offset {}", q.a))?;
    let shift = H * q.a;
    let w1 = WedgePoint::from_point(q.u1 - shift)?;
    let w2 = WedgePoint::from_point(q.u2 - shift)?;
    Ok(wedge_kernel_series(q.x, w1, w2)?.value().max(0.0))
}

/// Probability that a planar bridge of length L pinned at 0 stays in N_a,
/// i.e. 2πL·p_L^N(−ah, −ah).
pub fn survival_probability(a: f64, l: f64) -> Result<f64> {
    ensure(l > 0.0 && l.is_finite(), || format!("L must be positive, got {l}"))?;
    ensure(a >= 0.0, || format!("a must be positive, got {a}"))?;
    if a == f64::INFINITY {
        return Ok(1.0);
    }
    let w = WedgePoint::new(a * h_norm(), 0.0)?;
    let k = wedge_kernel_series(l, w, w)?;
    // 2πL · 3/(πL) = 6
    Ok((6.0 * k.series).clamp(0.0, 1.0))
}

/// Probability that a planar bridge of length J from w to 0 stays in N_q.
pub fn bridge_stay_probability(q: f64, j: f64, w: Point) -> Result<f64> {
    ensure(q > 0.0 && q.is_finite(), || format!("q must be positive, got {q}"))?;
    ensure(j > 0.0 && j.is_finite(), || format!("J must be positive, got {j}"))?;
    ensure(omega(w) <= q * (1.0 + 1e-12), || format!("w = {w} lies outside N_q"))?;
    let shift = H * q;
    let w1 = WedgePoint::from_point(w - shift)?;
    let w2 = WedgePoint::from_point(-shift)?;
    let k = wedge_kernel_series(j, w1, w2)?;
    if k.series <= 0.0 {
        return Ok(0.0);
    }
    // killed over free density, prefactors combined in log space
    let log_free = -(w).norm_sqr() / (2.0 * j) - (2.0 * PI * j).ln();
    Ok((k.log_prefactor + k.series.ln() - log_free).exp().clamp(0.0, 1.0))
}

/// Lower and upper power-law shapes a³L^{-3/2}e^{-Ca²/L}/C and C a³ L^{-3/2}.
pub fn survival_bounds(a: f64, l: f64, c: f64) -> (f64, f64) {
    let base = a.powi(3) / l.powf(1.5);
    (base * (-c * a * a / l).exp() / c, c * base)
}

/// Smallest C on a doubling search (up to `c_max`) for which both bounds
/// hold at every (a, L, P) triple given; `None` if no such C ≤ c_max.
pub fn smallest_sandwich_constant(values: &[(f64, f64, f64)], c_max: f64) -> Option<f64> {
    let holds = |c: f64| {
        values.iter().all(|&(a, l, p)| {
            let (lo, hi) = survival_bounds(a, l, c);
            lo <= p && p <= hi
        })
    };
    if !holds(c_max) {
        return None;
    }
    // bisection on the monotone predicate
    let (mut lo, mut hi) = (1.0, c_max);
    if holds(lo) {
        return Some(lo);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
