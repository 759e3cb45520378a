//! Monte Carlo counterparts of the wedge probabilities.

use crate::bridges::{omega, PlanarBridgeWalk, Point};
use crate::error::{ensure, Error, Result};
use crate::rng::SeedStream;
use crate::stats::{chunked, merge_all, Moments, ProbEstimate};

use super::barrier::barrier_profile;

const CHUNK: usize = 1024;
const MIN_ACCEPTED: usize = 100;

/// Grid points per unit length used by the rejection samplers.
pub const REJECTION_POINTS_PER_UNIT: usize = 16;

/// Nested grids: the fine grid has twice as many steps as the coarse one
/// and contains all of its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloGrid {
    pub coarse_steps: usize,
}

impl MonteCarloGrid {
    /// Roughly `per_unit` coarse points per unit length.
    pub fn per_unit(length: f64, per_unit: usize) -> Self {
        Self { coarse_steps: ((length * per_unit as f64).ceil() as usize).max(2) }
    }

    pub fn fine_steps(&self) -> usize {
        2 * self.coarse_steps
    }
}

/// Stay probabilities observed on two nested grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStayEstimate {
    pub coarse: ProbEstimate,
    pub fine: ProbEstimate,
    pub grid: MonteCarloGrid,
}

impl GridStayEstimate {
    /// Extrapolated remaining bias of the fine grid, assuming the
    /// over-survival of a discretely monitored path scales like √dx.
    pub fn margin(&self) -> f64 {
        (self.coarse.p() - self.fine.p()).max(0.0) / (std::f64::consts::SQRT_2 - 1.0)
    }

    /// Whether `exact` lies in [fine − margin − k·se, fine + k·se].
    pub fn consistent_with(&self, exact: f64, k: f64) -> bool {
        let p = self.fine.p();
        let se = self.fine.std_error();
        p - self.margin() - k * se <= exact && exact <= p + k * se
    }
}

/// Fraction of planar bridges from `start` to `end` over [0, length]
/// whose grid values all satisfy ω ≤ level.
pub fn stay_probability_mc(
    start: Point,
    end: Point,
    length: f64,
    level: f64,
    grid: MonteCarloGrid,
    n_paths: usize,
    seed: u64,
) -> Result<GridStayEstimate> {
    ensure(length > 0.0 && length.is_finite(), || format!("length must be positive, got {length}"))?;
    ensure(n_paths > 0, || "need at least one path".into())?;
    ensure(omega(start) <= level && omega(end) <= level, || {
        "both endpoints must lie in the wedge".into()
    })?;
    PlanarBridgeWalk::new(start, end, length, grid.fine_steps())?;
    let stream = SeedStream::new(seed);
    let parts = chunked(n_paths, CHUNK, |range| {
        let (mut coarse, mut fine) = (0u64, 0u64);
        for i in range {
            let mut rng = stream.rng(i as u64);
            let mut walk = PlanarBridgeWalk::new(start, end, length, grid.fine_steps()).expect("checked");
            let mut fine_alive = true;
            let mut coarse_alive = true;
            while let Some(p) = walk.step(&mut rng) {
                if omega(p) > level {
                    fine_alive = false;
                    if walk.index() % 2 == 0 {
                        coarse_alive = false;
                        break;
                    }
                }
            }
            coarse += coarse_alive as u64;
            fine += fine_alive as u64;
        }
        (coarse, fine)
    });
    let n = n_paths as u64;
    let coarse = parts.iter().map(|p| p.0).sum();
    let fine = parts.iter().map(|p| p.1).sum();
    Ok(GridStayEstimate {
        coarse: ProbEstimate { successes: coarse, trials: n },
        fine: ProbEstimate { successes: fine, trials: n },
        grid,
    })
}

/// Mean of a functional over the paths accepted by a rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub attempted: u64,
}

impl ConditionalEstimate {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.attempted as f64
    }
}

/// Conditional probability P[F | E] from a rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsionEstimate {
    /// successes = paths in F, trials = accepted paths.
    pub conditional: ProbEstimate,
    pub attempted: u64,
}

impl RepulsionEstimate {
    pub fn p(&self) -> f64 {
        self.conditional.p()
    }

    pub fn std_error(&self) -> f64 {
        self.conditional.std_error()
    }

    pub fn rate(&self) -> f64 {
        self.conditional.trials as f64 / self.attempted as f64
    }
}

fn insufficient(accepted: u64, attempted: u64) -> Result<()> {
    if (accepted as usize) < MIN_ACCEPTED {
        return Err(Error::InsufficientAcceptance {
            accepted: accepted as usize,
            rate: accepted as f64 / attempted.max(1) as f64,
        });
    }
    Ok(())
}

/// E[|V(x)| | max ω(V) ≤ 1] for the planar bridge of length L pinned at 0.
pub fn conditional_abs_moment(x: f64, l: f64, n_samples: usize, seed: u64) -> Result<ConditionalEstimate> {
    conditional_abs_moment_on_grid(x, l, (l as usize).max(1) * REJECTION_POINTS_PER_UNIT, n_samples, seed)
}

/// [`conditional_abs_moment`] on an explicit grid of `n` steps.
pub fn conditional_abs_moment_on_grid(
    x: f64,
    l: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ConditionalEstimate> {
    ensure(l >= 2.0 && l.is_finite(), || format!("L must be at least 2, got {l}"))?;
    ensure(x >= 1.0 && x <= l - 1.0, || format!("x must lie in [1, L-1], got {x}"))?;
    PlanarBridgeWalk::new(Point::new(0.0, 0.0), Point::new(0.0, 0.0), l, n)?;
    let ix = (x / l * n as f64).round() as usize;
    let stream = SeedStream::new(seed);
    let parts = chunked(n_samples, CHUNK, |range| {
        let mut m = Moments::default();
        for i in range {
            let mut rng = stream.rng(i as u64);
            let zero = Point::new(0.0, 0.0);
            let mut walk = PlanarBridgeWalk::new(zero, zero, l, n).expect("checked");
            let mut value = 0.0;
            let mut ok = true;
            while let Some(p) = walk.step(&mut rng) {
                if omega(p) > 1.0 {
                    ok = false;
                    break;
                }
                if walk.index() == ix {
                    value = p.norm();
                }
            }
            if ok {
                m.push(value);
            }
        }
        m
    });
    let m = merge_all(&parts);
    insufficient(m.count, n_samples as u64)?;
    Ok(ConditionalEstimate {
        mean: m.mean,
        std_error: m.std_error(),
        accepted: m.count,
        attempted: n_samples as u64,
    })
}

/// P[ω(V(x)) ≤ 1 − q_{γ,L}(x) for all grid x | max ω(V) ≤ 1].
pub fn entropic_repulsion(l: f64, gamma: f64, n_samples: usize, seed: u64) -> Result<RepulsionEstimate> {
    entropic_repulsion_on_grid(l, gamma, (l as usize).max(1) * REJECTION_POINTS_PER_UNIT, n_samples, seed)
}

/// [`entropic_repulsion`] on an explicit grid of `n` steps.
pub fn entropic_repulsion_on_grid(
    l: f64,
    gamma: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<RepulsionEstimate> {
    let barrier = barrier_profile(l, gamma, n)?;
    let stream = SeedStream::new(seed);
    let parts = chunked(n_samples, CHUNK, |range| {
        let (mut accepted, mut inside) = (0u64, 0u64);
        for i in range {
            let mut rng = stream.rng(i as u64);
            let zero = Point::new(0.0, 0.0);
            let mut walk = PlanarBridgeWalk::new(zero, zero, l, n).expect("checked");
            let mut ok = true;
            let mut below = true;
            while let Some(p) = walk.step(&mut rng) {
                let w = omega(p);
                if w > 1.0 {
                    ok = false;
                    break;
                }
                if w > 1.0 - barrier[walk.index()] {
                    below = false;
                }
            }
            if ok {
                accepted += 1;
                inside += below as u64;
            }
        }
        (accepted, inside)
    });
    let accepted: u64 = parts.iter().map(|p| p.0).sum();
    let inside: u64 = parts.iter().map(|p| p.1).sum();
    insufficient(accepted, n_samples as u64)?;
    Ok(RepulsionEstimate {
        conditional: ProbEstimate { successes: inside, trials: accepted },
        attempted: n_samples as u64,
    })
}
