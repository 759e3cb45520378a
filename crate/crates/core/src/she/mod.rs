//! The stochastic heat equation ∂ₜ𝒰 = ½Δ𝒰 + 𝒰η on the torus [0, L).
//!
//! One time step is the Strang splitting H(dt/2)·M·H(dt/2) where H is the
//! heat semigroup of the nearest-neighbour lattice Laplacian, applied
//! exactly in Fourier space, and M multiplies every cell by the mean-one
//! lognormal factor exp(√(dt/Δx)ξ − dt/(2Δx)). Both factors keep the field
//! positive. Consecutive half steps are merged, so a run of k steps costs k
//! heat applications plus one.

mod dump;
mod experiments;

pub use dump::{read_field, write_field};
pub use experiments::{
    check_time_reversal, check_time_reversal_with, estimate_height_variance, estimate_i_variance, estimate_yl_variance,
    von_mises_bump, HeightVarianceRun, IVarianceEstimate, IVarianceRun, Resolution,
    TimeReversalReport, VariancePoint, YlEstimate,
};

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::bridges::fill_bridge;
use crate::error::{ensure, invalid, Error, Result};
use crate::rng::{SeedStream, StreamRng};

/// A periodic field 𝒰(t, ·) on n_x cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SheField {
    pub l: f64,
    pub n_x: usize,
    pub dt: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

impl SheField {
    pub fn dx(&self) -> f64 {
        self.l / self.n_x as f64
    }

    /// ∫𝒰 dx (cell sum times Δx).
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// h = log 𝒰.
    pub fn height(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }

    /// log ∫𝒰 f dx.
    pub fn log_pairing(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_x);
        let s: f64 = self.values.iter().zip(f).map(|(u, g)| u * g).sum();
        (s * self.dx()).ln()
    }
}

/// ρ = 𝒰/∫𝒰, normalised so that Σρ·Δx = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointDensity {
    pub dx: f64,
    pub values: Vec<f64>,
}

impl EndpointDensity {
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }
}

pub fn endpoint_density(field: &SheField) -> EndpointDensity {
    let mass = field.mass();
    EndpointDensity {
        dx: field.dx(),
        values: field.values.iter().map(|v| v / mass).collect(),
    }
}

/// Initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// e^{B} for a fresh standard Brownian bridge B on [0, L].
    StationaryBridge,
    Constant(f64),
    Field(Vec<f64>),
}

/// Largest dyadic time step 2^{-k} not exceeding Δx²/4.
pub fn default_dt(dx: f64) -> f64 {
    let bound = dx * dx / 4.0;
    2f64.powi(bound.log2().floor() as i32)
}

/// Lattice geometry and time step of a solve.
#[derive(Clone)]
pub struct SheSolver {
    l: f64,
    n_x: usize,
    dt: f64,
    noise: bool,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    half: Vec<f64>,
    full: Vec<f64>,
}

impl std::fmt::Debug for SheSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SheSolver")
            .field("l", &self.l)
            .field("n_x", &self.n_x)
            .field("dt", &self.dt)
            .field("noise", &self.noise)
            .finish()
    }
}

impl SheSolver {
    pub fn new(l: f64, n_x: usize, dt: f64) -> Result<Self> {
        ensure(l > 0.0 && l.is_finite(), || format!("L must be positive, got {l}"))?;
        ensure(n_x >= 4, || format!("need at least 4 cells, got {n_x}"))?;
        let dx = l / n_x as f64;
        ensure(dt > 0.0 && dt <= dx * dx / 4.0 * (1.0 + 1e-12), || {
            format!("time step {dt} violates dt <= dx^2/4 = {}", dx * dx / 4.0)
        })?;
        let mut planner = FftPlanner::new();
        let symbol = |m: usize| (1.0 - (2.0 * std::f64::consts::PI * m as f64 / n_x as f64).cos()) / (dx * dx);
        let half = (0..n_x).map(|m| (-0.5 * dt * symbol(m)).exp()).collect();
        let full = (0..n_x).map(|m| (-dt * symbol(m)).exp()).collect();
        Ok(Self {
            l,
            n_x,
            dt,
            noise: true,
            forward: planner.plan_fft_forward(n_x),
            inverse: planner.plan_fft_inverse(n_x),
            half,
            full,
        })
    }

    /// Solver with the default time step for `cells_per_unit` cells per unit length.
    pub fn with_resolution(l: f64, cells_per_unit: f64) -> Result<Self> {
        let n_x = ((l * cells_per_unit).round() as usize).max(4);
        Self::new(l, n_x, default_dt(l / n_x as f64))
    }

    /// Switches the multiplicative noise off (pure heat flow).
    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n_x as f64
    }

    /// Number of steps to reach time t; t must be a multiple of dt.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        ensure(t >= 0.0 && t.is_finite(), || format!("time must be non-negative, got {t}"))?;
        let k = (t / self.dt).round();
        ensure((k * self.dt - t).abs() <= 1e-9 * t.max(1.0), || {
            format!("time {t} is not a multiple of dt = {}", self.dt)
        })?;
        Ok(k as usize)
    }

    /// Initial field on the lattice.
    pub fn initial_field(&self, initial: &Initial, rng: &mut StreamRng) -> Result<Vec<f64>> {
        match initial {
            Initial::StationaryBridge => {
                let mut b = vec![0.0; self.n_x + 1];
                fill_bridge(rng, self.l, &mut b);
                b.truncate(self.n_x);
                Ok(b.into_iter().map(f64::exp).collect())
            }
            Initial::Constant(c) => {
                ensure(*c > 0.0, || format!("initial constant must be positive, got {c}"))?;
                Ok(vec![*c; self.n_x])
            }
            Initial::Field(v) => {
                ensure(v.len() == self.n_x, || {
                    format!("initial field has {} cells, expected {}", v.len(), self.n_x)
                })?;
                ensure(v.iter().all(|x| *x > 0.0 && x.is_finite()), || {
                    "initial field must be positive".into()
                })?;
                Ok(v.clone())
            }
        }
    }

    fn heat(&self, u: &mut [f64], buf: &mut [Complex64], multiplier: &[f64]) {
        for (b, v) in buf.iter_mut().zip(u.iter()) {
            *b = Complex64::new(*v, 0.0);
        }
        self.forward.process(buf);
        for (b, m) in buf.iter_mut().zip(multiplier) {
            *b *= *m;
        }
        self.inverse.process(buf);
        let scale = 1.0 / self.n_x as f64;
        for (v, b) in u.iter_mut().zip(buf.iter()) {
            *v = b.re * scale;
        }
    }

    fn noise(&self, u: &mut [f64], rng: &mut StreamRng) {
        if !self.noise {
            return;
        }
        let var = self.dt / self.dx();
        let sd = var.sqrt();
        for v in u.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v *= (sd * z - 0.5 * var).exp();
        }
    }

    /// Evolves `u0` and returns the field at each checkpoint (ascending).
    pub fn run(&self, u0: Vec<f64>, checkpoints: &[f64], rng: &mut StreamRng) -> Result<Vec<SheField>> {
        ensure(checkpoints.windows(2).all(|w| w[0] <= w[1]), || {
            "checkpoints must be ascending".into()
        })?;
        let targets = checkpoints
            .iter()
            .map(|&t| self.steps_to(t))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_x];
        let mut out = Vec::with_capacity(targets.len());
        // s holds M·H(dt/2)·U after the first step, M·H(dt)·s afterwards;
        // the field itself is H(dt/2)·s.
        let mut s = u0;
        let mut done = 0usize;
        for (&k, &t) in targets.iter().zip(checkpoints) {
            while done < k {
                let mult = if done == 0 { &self.half } else { &self.full };
                self.heat(&mut s, &mut buf, mult);
                self.noise(&mut s, rng);
                done += 1;
            }
            let mut u = s.clone();
            if done > 0 {
                self.heat(&mut u, &mut buf, &self.half);
            }
            if let Some(bad) = u.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::OutOfRange(format!(
                    "field lost positivity (value {bad}) at t = {t}; refine the grid"
                )));
            }
            out.push(SheField { l: self.l, n_x: self.n_x, dt: self.dt, t, values: u });
        }
        Ok(out)
    }

    /// Cell updates needed to reach time t once.
    pub fn cost(&self, t: f64) -> f64 {
        self.n_x as f64 * (t / self.dt).ceil()
    }
}

/// Solves the SHE from `initial` and returns checkpointed fields.
pub fn solve_she(
    l: f64,
    n_x: usize,
    dt: f64,
    checkpoints: &[f64],
    initial: &Initial,
    seed: u64,
) -> Result<Vec<SheField>> {
    if checkpoints.is_empty() {
        return Err(invalid("no checkpoint times given"));
    }
    let solver = SheSolver::new(l, n_x, dt)?;
    let mut rng = SeedStream::new(seed).rng(0);
    let u0 = solver.initial_field(initial, &mut rng)?;
    let mut noise_rng = SeedStream::new(seed).rng(1);
    solver.run(u0, checkpoints, &mut noise_rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_step() {
        assert_eq!(default_dt(0.125), 1.0 / 256.0);
        assert_eq!(default_dt(0.1), 1.0 / 512.0);
        assert!(SheSolver::new(4.0, 64, 1.0 / 512.0).is_err());
        assert!(SheSolver::new(4.0, 64, 1.0 / 1024.0).is_ok());
    }

    #[test]
    fn heat_flow_conserves_mass() {
        let solver = SheSolver::with_resolution(4.0, 8.0).unwrap().without_noise();
        let mut rng = SeedStream::new(3).rng(0);
        let u0 = solver.initial_field(&Initial::StationaryBridge, &mut rng).unwrap();
        let m0 = u0.iter().sum::<f64>() * solver.dx();
        let out = solver.run(u0, &[0.0, 0.5, 2.0], &mut rng).unwrap();
        for f in &out {
            assert!((f.mass() - m0).abs() / m0 < 1e-12);
        }
        // flattening
        let spread = |f: &SheField| {
            let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
            hi - lo
        };
        assert!(spread(&out[2]) < spread(&out[1]));
    }

    #[test]
    fn merged_half_steps_match_plain_splitting() {
        let solver = SheSolver::with_resolution(2.0, 8.0).unwrap();
        let u0: Vec<f64> = (0..16).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        let mut r1 = SeedStream::new(1).rng(0);
        let merged = solver.run(u0.clone(), &[10.0 * solver.dt()], &mut r1).unwrap();
        let mut r2 = SeedStream::new(1).rng(0);
        let mut u = u0;
        let mut buf = vec![Complex64::new(0.0, 0.0); 16];
        for _ in 0..10 {
            solver.heat(&mut u, &mut buf, &solver.half);
            solver.noise(&mut u, &mut r2);
            solver.heat(&mut u, &mut buf, &solver.half);
        }
        for (a, b) in merged[0].values.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn checkpoint_validation() {
        let solver = SheSolver::with_resolution(2.0, 8.0).unwrap();
        let mut rng = SeedStream::new(1).rng(0);
        assert!(solver.run(vec![1.0; 16], &[0.1], &mut rng).is_err());
        assert!(solver.run(vec![1.0; 16], &[1.0, 0.5], &mut rng).is_err());
        assert!(solver.initial_field(&Initial::Field(vec![1.0; 3]), &mut rng).is_err());
        assert!(solver.initial_field(&Initial::Constant(-1.0), &mut rng).is_err());
    }

    #[test]
    fn density_is_normalised() {
        let f = SheField { l: 3.0, n_x: 6, dt: 0.01, t: 0.0, values: vec![2.0; 6] };
        let rho = endpoint_density(&f);
        assert!((rho.total() - 1.0).abs() < 1e-15);
        assert!(rho.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }
}
