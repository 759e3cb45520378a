use crate::bridges::{fill_bridge, log_trapezoid_exp};
use crate::error::{ensure, Error, Result};
use crate::rng::SeedStream;
use crate::stats::{chunked, jackknife_variance, Moments};

use super::{Initial, SheSolver};

/// Lattice resolution and work limit for SHE experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub cells_per_unit: f64,
    /// Maximum total number of cell updates.
    pub cell_budget: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { cells_per_unit: 8.0, cell_budget: 2e10 }
    }
}

fn guard(requested: f64, budget: f64) -> Result<()> {
    if requested > budget {
        return Err(Error::ResourceGuard { requested, budget });
    }
    Ok(())
}

/// Sample variance of h(t, 0) over independent replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePoint {
    pub t: f64,
    pub l: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub var_estimate: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub n_x: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightVarianceRun {
    pub alpha: f64,
    pub lambda: f64,
    pub t_list: Vec<f64>,
    pub n_replicas: usize,
    pub resolution: Resolution,
    pub seed: u64,
}

impl HeightVarianceRun {
    /// Planned (L, times) groups: one group per distinct L.
    fn groups(&self) -> Vec<(f64, Vec<f64>)> {
        let mut ts = self.t_list.clone();
        ts.sort_by(f64::total_cmp);
        if self.alpha == 0.0 {
            return vec![(self.lambda, ts)];
        }
        ts.into_iter().map(|t| (self.lambda * t.powf(self.alpha), vec![t])).collect()
    }

    pub fn run(&self) -> Result<Vec<VariancePoint>> {
        ensure((0.0..=2.0 / 3.0 + 1e-12).contains(&self.alpha), || {
            format!("alpha must lie in [0, 2/3], got {}", self.alpha)
        })?;
        ensure(self.lambda > 0.0, || format!("lambda must be positive, got {}", self.lambda))?;
        ensure(!self.t_list.is_empty() && self.t_list.iter().all(|t| *t > 0.0), || {
            "times must be positive".into()
        })?;
        ensure(self.n_replicas >= 2, || "need at least 2 replicas".into())?;
        let groups = self.groups();
        let mut plans = Vec::new();
        let mut cost = 0.0;
        for (l, ts) in &groups {
            let solver = SheSolver::with_resolution(*l, self.resolution.cells_per_unit)?;
            for t in ts {
                solver.steps_to(*t)?;
            }
            cost += self.n_replicas as f64 * solver.cost(*ts.last().expect("non-empty"));
            plans.push(solver);
        }
        guard(cost, self.resolution.cell_budget)?;

        let root = SeedStream::new(self.seed);
        let mut points = Vec::new();
        for (g, ((l, ts), solver)) in groups.iter().zip(&plans).enumerate() {
            let stream = root.child(g as u64);
            let per_replica = chunked(self.n_replicas, 4, |range| {
                range
                    .map(|i| {
                        let mut rng = stream.rng(i as u64);
                        let u0 = solver.initial_field(&Initial::StationaryBridge, &mut rng)?;
                        let fields = solver.run(u0, ts, &mut rng)?;
                        Ok(fields.iter().map(|f| f.values[0].ln()).collect::<Vec<_>>())
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .concat();
            for (k, t) in ts.iter().enumerate() {
                let hs: Vec<f64> = per_replica.iter().map(|h| h[k]).collect();
                let (var, se) = jackknife_variance(&hs);
                points.push(VariancePoint {
                    t: *t,
                    l: *l,
                    alpha: self.alpha,
                    lambda: self.lambda,
                    var_estimate: var.max(0.0),
                    std_error: se,
                    n_replicas: self.n_replicas,
                    n_x: solver.n_x(),
                    dt: solver.dt(),
                });
            }
        }
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(points)
    }
}

/// Var[h(t, 0)] at L = λt^α for each t, from stationary-bridge initial data.
pub fn estimate_height_variance(
    alpha: f64,
    lambda: f64,
    t_list: &[f64],
    n_replicas: usize,
    resolution: Resolution,
    seed: u64,
) -> Result<Vec<VariancePoint>> {
    HeightVarianceRun {
        alpha,
        lambda,
        t_list: t_list.to_vec(),
        n_replicas,
        resolution,
        seed,
    }
    .run()
}

/// Moments of Y = E_W log ∫₀^L e^{B+W} over the outer bridge B.
#[derive(Debug, Clone, PartialEq)]
pub struct YlEstimate {
    pub l: f64,
    pub mean: f64,
    pub mean_se: f64,
    /// Outer variance with the inner-average noise removed.
    pub variance: f64,
    pub variance_se: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub sandwich_checked: u64,
    pub sandwich_violations: u64,
}

pub fn estimate_yl_variance(l: f64, n_outer: usize, n_inner: usize, n_grid: usize, seed: u64) -> Result<YlEstimate> {
    ensure(l > 0.0 && l.is_finite(), || format!("L must be positive, got {l}"))?;
    ensure(n_inner >= 100, || format!("need at least 100 inner samples, got {n_inner}"))?;
    ensure(n_outer >= 2, || "need at least 2 outer samples".into())?;
    ensure(n_grid >= 2, || format!("grid too small: {n_grid}"))?;
    let dx = l / n_grid as f64;
    let log_l = l.ln();
    let stream = SeedStream::new(seed);
    let rows = chunked(n_outer, 8, |range| {
        let mut b = vec![0.0; n_grid + 1];
        let mut w = vec![0.0; n_grid + 1];
        range
            .map(|i| {
                let mut rng = stream.rng(i as u64);
                fill_bridge(&mut rng, l, &mut b);
                let mut inner = Moments::default();
                let mut violations = 0u64;
                for _ in 0..n_inner {
                    fill_bridge(&mut rng, l, &mut w);
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for (wi, bi) in w.iter_mut().zip(&b) {
                        *wi += bi;
                        lo = lo.min(*wi);
                        hi = hi.max(*wi);
                    }
                    let y = log_trapezoid_exp(&w, dx);
                    let centred = y - log_l;
                    let tol = 1e-12 * (1.0 + y.abs());
                    if centred < lo - tol || centred > hi + tol {
                        violations += 1;
                    }
                    inner.push(y);
                }
                (inner.mean, inner.variance(), violations)
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let means: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let inner_var = rows.iter().map(|r| r.1).sum::<f64>() / n_outer as f64;
    let (raw_var, var_se) = jackknife_variance(&means);
    let m: Moments = means.iter().copied().collect();
    Ok(YlEstimate {
        l,
        mean: m.mean,
        mean_se: m.std_error(),
        variance: raw_var - inner_var / n_inner as f64,
        variance_se: var_se,
        n_outer,
        n_inner,
        sandwich_checked: (n_outer * n_inner) as u64,
        sandwich_violations: rows.iter().map(|r| r.2).sum(),
    })
}

/// E_g Var_η[E_f log ∫𝒰(t,·;g) f] estimated with nested sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct IVarianceEstimate {
    pub t: f64,
    pub l: f64,
    pub variance: f64,
    pub std_error: f64,
    pub n_outer: usize,
    pub n_noise: usize,
    pub n_f: usize,
    pub n_x: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IVarianceRun {
    pub t: f64,
    pub l: f64,
    pub n_f: usize,
    pub n_outer: usize,
    /// Independent noise realisations per initial condition g.
    pub n_noise: usize,
    pub n_x: usize,
    pub dt: f64,
    pub cell_budget: f64,
    pub seed: u64,
}

impl IVarianceRun {
    pub fn run(&self) -> Result<IVarianceEstimate> {
        ensure(self.n_f >= 2, || "need at least 2 test functions".into())?;
        ensure(self.n_outer >= 2, || "need at least 2 outer samples".into())?;
        ensure(self.n_noise >= 2, || "need at least 2 noise replicas per g".into())?;
        let solver = SheSolver::new(self.l, self.n_x, self.dt)?;
        solver.steps_to(self.t)?;
        guard(
            (self.n_outer * self.n_noise) as f64 * solver.cost(self.t),
            self.cell_budget,
        )?;
        let stream = SeedStream::new(self.seed);
        let n_x = self.n_x;
        let per_g = chunked(self.n_outer, 2, |range| {
            range
                .map(|i| {
                    let gs = stream.child(i as u64);
                    let mut rng = gs.rng(0);
                    let g = solver.initial_field(&Initial::StationaryBridge, &mut rng)?;
                    let mut replicas = Moments::default();
                    let mut within = 0.0;
                    let mut f = vec![0.0; n_x + 1];
                    for k in 0..self.n_noise {
                        let mut rng = gs.rng(1 + k as u64);
                        let u = solver.run(g.clone(), &[self.t], &mut rng)?.pop().expect("one checkpoint");
                        let mut xs = Moments::default();
                        for _ in 0..self.n_f {
                            fill_bridge(&mut rng, self.l, &mut f);
                            let s: f64 = u.values.iter().zip(&f).map(|(a, b)| a * b.exp()).sum();
                            xs.push((s * u.dx()).ln());
                        }
                        replicas.push(xs.mean);
                        within += xs.variance();
                    }
                    within /= self.n_noise as f64;
                    Ok(replicas.variance() - within / self.n_f as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .concat();
        let m: Moments = per_g.iter().copied().collect();
        Ok(IVarianceEstimate {
            t: self.t,
            l: self.l,
            variance: m.mean,
            std_error: m.std_error(),
            n_outer: self.n_outer,
            n_noise: self.n_noise,
            n_f: self.n_f,
            n_x: self.n_x,
            dt: self.dt,
        })
    }
}

/// Nested estimate of Var[I_L(t)] with two noise replicas per g.
pub fn estimate_i_variance(
    t: f64,
    l: f64,
    n_f: usize,
    n_outer: usize,
    n_x: usize,
    dt: f64,
    seed: u64,
) -> Result<IVarianceEstimate> {
    IVarianceRun {
        t,
        l,
        n_f,
        n_outer,
        n_noise: 2,
        n_x,
        dt,
        cell_budget: Resolution::default().cell_budget,
        seed,
    }
    .run()
}

/// Normalised bump ∝ exp(κ cos(2π(x − c)/L)) on the n_x cell grid.
pub fn von_mises_bump(l: f64, n_x: usize, center: f64, kappa: f64) -> Vec<f64> {
    let dx = l / n_x as f64;
    let raw: Vec<f64> = (0..n_x)
        .map(|i| (kappa * (2.0 * std::f64::consts::PI * (i as f64 * dx - center) / l).cos()).exp())
        .collect();
    let mass = raw.iter().sum::<f64>() * dx;
    raw.into_iter().map(|v| v / mass).collect()
}

/// Law of log ∬𝒵(t,x;0,y)f(x)g(y) computed forwards from g and from f.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeReversalReport {
    pub n_replicas: usize,
    pub forward_mean: f64,
    pub forward_mean_se: f64,
    pub forward_var: f64,
    pub forward_var_se: f64,
    pub swapped_mean: f64,
    pub swapped_mean_se: f64,
    pub swapped_var: f64,
    pub swapped_var_se: f64,
}

impl TimeReversalReport {
    /// Mean difference in units of the combined standard error.
    pub fn mean_z(&self) -> f64 {
        (self.forward_mean - self.swapped_mean).abs() / self.forward_mean_se.hypot(self.swapped_mean_se)
    }

    pub fn var_z(&self) -> f64 {
        (self.forward_var - self.swapped_var).abs() / self.forward_var_se.hypot(self.swapped_var_se)
    }

    pub fn passed(&self, k: f64) -> bool {
        self.mean_z() <= k && self.var_z() <= k
    }
}

/// Time-reversal check with two offset von Mises bumps.
pub fn check_time_reversal(t: f64, l: f64, n_x: usize, dt: f64, n_replicas: usize, seed: u64) -> Result<TimeReversalReport> {
    let f = von_mises_bump(l, n_x, 0.25 * l, 2.0);
    let g = von_mises_bump(l, n_x, 0.6 * l, 1.0);
    check_time_reversal_with(t, l, n_x, dt, n_replicas, &f, &g, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn check_time_reversal_with(
    t: f64,
    l: f64,
    n_x: usize,
    dt: f64,
    n_replicas: usize,
    f: &[f64],
    g: &[f64],
    seed: u64,
) -> Result<TimeReversalReport> {
    ensure(n_replicas >= 2, || "need at least 2 replicas".into())?;
    let solver = SheSolver::new(l, n_x, dt)?;
    let init_f = solver.initial_field(&Initial::Field(f.to_vec()), &mut SeedStream::new(0).rng(0))?;
    let init_g = solver.initial_field(&Initial::Field(g.to_vec()), &mut SeedStream::new(0).rng(0))?;
    let root = SeedStream::new(seed);
    let sample = |start: &Vec<f64>, against: &[f64], stream: SeedStream| -> Result<Vec<f64>> {
        chunked(n_replicas, 16, |range| {
            range
                .map(|i| {
                    let mut rng = stream.rng(i as u64);
                    let u = solver.run(start.clone(), &[t], &mut rng)?.pop().expect("one checkpoint");
                    Ok(u.log_pairing(against))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map(|v| v.concat())
    };
    let forward = sample(&init_g, f, root.child(0))?;
    let swapped = sample(&init_f, g, root.child(1))?;
    let summarise = |xs: &[f64]| {
        let m: Moments = xs.iter().copied().collect();
        let (v, vse) = jackknife_variance(xs);
        (m.mean, m.std_error(), v, vse)
    };
    let (fm, fmse, fv, fvse) = summarise(&forward);
    let (sm, smse, sv, svse) = summarise(&swapped);
    Ok(TimeReversalReport {
        n_replicas,
        forward_mean: fm,
        forward_mean_se: fmse,
        forward_var: fv,
        forward_var_se: fvse,
        swapped_mean: sm,
        swapped_mean_se: smse,
        swapped_var: sv,
        swapped_var_se: svse,
    })
}

