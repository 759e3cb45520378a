//! Where the drift-corrected bridge first meets the boundary of N_q.
//!
//! With y = Lx/(L−x), the process Y(y) = V(x)/(1 − x/L) is a planar
//! Brownian motion started at 0. The map z ↦ (z − qh)^{3/2} opens N_q onto
//! a half-plane, which makes the law of |Y(κ) − qh| at the exit time κ an
//! explicit arctan.

use std::f64::consts::{FRAC_PI_3, PI};

use crate::bridges::{bridge_transition, dot, omega, Point, H, V1, V2};
use crate::error::{ensure, invalid, Error, Result};
use crate::rng::{SeedStream, StreamRng};
use crate::stats::{chunked, ecdf_sup_distance, ks_critical_1pct, ks_uniform};

/// Paths are followed up to x = L(1 − HORIZON_EPS).
pub const HORIZON_EPS: f64 = 1e-3;

/// First crossing of ∂N_q by V(x)/(1 − x/L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitSample {
    /// Crossing time on the bridge clock.
    pub tau: f64,
    /// Crossing time on the Brownian clock, τ = Lκ/(L + κ).
    pub kappa: f64,
    /// V(τ)/(1 − τ/L), a point of ∂N_q.
    pub location: Point,
    /// V(τ).
    pub raw: Point,
}

impl HitSample {
    /// |location − qh|.
    pub fn distance(&self, q: f64) -> f64 {
        (self.location - H * q).norm()
    }
}

/// P[|Y(κ) − qh| ≥ ξ] = (2/π) arctan((q|h|/ξ)^{3/2}).
pub fn arctan_tail(q: f64, xi: f64) -> f64 {
    let hn = H.norm();
    if xi <= 0.0 {
        return 1.0;
    }
    2.0 / PI * (q * hn / xi).powf(1.5).atan()
}

/// (z − qh)^{3/2} on the principal branch, for z − qh in N.
pub fn conformal_map(z: Point, q: f64) -> Result<Point> {
    let w = z - H * q;
    let (r, theta) = w.to_polar();
    if r > 0.0 && theta.abs() > FRAC_PI_3 * (1.0 + 1e-12) {
        return Err(invalid(format!("{z} lies outside the shifted wedge")));
    }
    Ok(Point::from_polar(r.powf(1.5), 1.5 * theta))
}

/// Time grid uniform in log(q² + y), from y = 0 to the horizon.
#[derive(Debug, Clone)]
struct HitGrid {
    y: Vec<f64>,
    x: Vec<f64>,
}

impl HitGrid {
    fn new(l: f64, q: f64, n: usize) -> Self {
        let y_max = l * (1.0 - HORIZON_EPS) / HORIZON_EPS;
        let s = q * q;
        let growth = ((s + y_max) / s).ln() / n as f64;
        let y: Vec<f64> = (0..=n)
            .map(|i| if i == n { y_max } else { s * ((growth * i as f64).exp() - 1.0) })
            .collect();
        let x = y.iter().map(|&y| l * y / (l + y)).collect();
        Self { y, x }
    }

    fn len(&self) -> usize {
        self.y.len()
    }
}

fn interpolate(l: f64, q: f64, grid: &HitGrid, i0: usize, i1: usize, a: Point, b: Point) -> HitSample {
    // ω is the larger of two linear forms; take the first one to reach q
    let t = [V1, V2]
        .iter()
        .filter_map(|&v| {
            let (start, slope) = (dot(v, a), dot(v, b - a));
            (slope > 0.0).then(|| (q - start) / slope)
        })
        .fold(1.0f64, f64::min)
        .clamp(0.0, 1.0);
    let location = a + (b - a) * t;
    let kappa = grid.y[i0] + t * (grid.y[i1] - grid.y[i0]);
    let tau = l * kappa / (l + kappa);
    HitSample { tau, kappa, location, raw: location * (1.0 - tau / l) }
}

/// Follows one bridge on the fine grid and reports the first crossing seen
/// on the fine grid and on its even-index subgrid.
fn first_hits(rng: &mut StreamRng, l: f64, q: f64, grid: &HitGrid, every: usize) -> (Option<HitSample>, Option<HitSample>) {
    let zero = Point::new(0.0, 0.0);
    let mut v = zero;
    let mut prev_fine = zero;
    let mut prev_coarse = zero;
    let mut fine = None;
    for i in 1..grid.len() {
        v = bridge_transition(rng, v, grid.x[i - 1], grid.x[i], zero, l);
        let y = v * ((l + grid.y[i]) / l);
        if fine.is_none() && omega(y) >= q {
            fine = Some(interpolate(l, q, grid, i - 1, i, prev_fine, y));
        }
        prev_fine = y;
        if i % every == 0 {
            if omega(y) >= q {
                return (fine, Some(interpolate(l, q, grid, i - every, i, prev_coarse, y)));
            }
            prev_coarse = y;
        }
    }
    (fine, None)
}

fn check_args(l: f64, q: f64, n_grid: usize) -> Result<()> {
    ensure(l > 0.0 && l.is_finite(), || format!("L must be positive, got {l}"))?;
    ensure(q > 0.0 && q.is_finite(), || format!("q must be positive, got {q}"))?;
    ensure(n_grid >= 16, || format!("grid too small: {n_grid}"))
}

/// One first-hit sample on a grid of `n_grid` steps.
pub fn simulate_first_hit(l: f64, q: f64, n_grid: usize, seed: u64) -> Result<HitSample> {
    check_args(l, q, n_grid)?;
    let grid = HitGrid::new(l, q, n_grid);
    let mut rng = SeedStream::new(seed).rng(0);
    first_hits(&mut rng, l, q, &grid, 1)
        .0
        .ok_or(Error::NoHit { horizon: l * (1.0 - HORIZON_EPS) })
}

/// Hit samples on nested grids (`n_grid` and `2·n_grid` steps) from the
/// same paths.
#[derive(Debug, Clone, PartialEq)]
pub struct HitLaw {
    pub l: f64,
    pub q: f64,
    pub fine: Vec<HitSample>,
    pub coarse: Vec<HitSample>,
    pub fine_misses: usize,
    pub coarse_misses: usize,
}

pub fn sample_hit_law(l: f64, q: f64, n_grid: usize, n_samples: usize, seed: u64) -> Result<HitLaw> {
    check_args(l, q, n_grid)?;
    let grid = HitGrid::new(l, q, 2 * n_grid);
    let stream = SeedStream::new(seed);
    let parts = chunked(n_samples, 256, |range| {
        range
            .map(|i| first_hits(&mut stream.rng(i as u64), l, q, &grid, 2))
            .collect::<Vec<_>>()
    });
    let mut law = HitLaw { l, q, fine: Vec::new(), coarse: Vec::new(), fine_misses: 0, coarse_misses: 0 };
    for (f, c) in parts.into_iter().flatten() {
        match f {
            Some(h) => law.fine.push(h),
            None => law.fine_misses += 1,
        }
        match c {
            Some(h) => law.coarse.push(h),
            None => law.coarse_misses += 1,
        }
    }
    Ok(law)
}

/// Outcome of comparing a [`HitLaw`] with the arctan law.
#[derive(Debug, Clone, PartialEq)]
pub struct HitLawTest {
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub grid_margin: f64,
    pub n: usize,
}

impl HitLawTest {
    pub fn passed(&self) -> bool {
        self.ks_statistic <= self.ks_critical + self.grid_margin
    }
}

impl HitLaw {
    fn uniforms(&self, hits: &[HitSample]) -> Vec<f64> {
        hits.iter().map(|h| 1.0 - arctan_tail(self.q, h.distance(self.q))).collect()
    }

    /// Kolmogorov–Smirnov test of F(|Y(κ) − qh|) against Uniform[0, 1],
    /// with the grid margin sup|F̂_coarse − F̂_fine|/(√2 − 1).
    pub fn ks_test(&self) -> HitLawTest {
        let mut fine = self.uniforms(&self.fine);
        let coarse = self.uniforms(&self.coarse);
        let margin = ecdf_sup_distance(&coarse, &fine) / (std::f64::consts::SQRT_2 - 1.0);
        let n = fine.len();
        HitLawTest {
            ks_statistic: ks_uniform(&mut fine),
            ks_critical: ks_critical_1pct(n),
            grid_margin: margin,
            n,
        }
    }

    /// Empirical P[|Y(κ) − qh| ≥ ξ] on the fine grid with its standard error.
    pub fn empirical_tail(&self, xi: f64) -> (f64, f64) {
        let n = self.fine.len() as f64;
        let k = self.fine.iter().filter(|h| h.distance(self.q) >= xi).count() as f64;
        let p = k / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }

    /// Same tail on the coarse grid.
    pub fn coarse_tail(&self, xi: f64) -> f64 {
        let n = self.coarse.len() as f64;
        self.coarse.iter().filter(|h| h.distance(self.q) >= xi).count() as f64 / n
    }

    /// Empirical P[|V(τ)| ≥ q|h| + ξ].
    pub fn raw_tail(&self, xi: f64) -> f64 {
        let level = self.q * H.norm() + xi;
        let n = self.fine.len() as f64;
        self.fine.iter().filter(|h| h.raw.norm() >= level).count() as f64 / n
    }
}
