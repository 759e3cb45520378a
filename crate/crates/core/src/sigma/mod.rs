//! Monte Carlo estimation of the diffusion constant σ_L².
//!
//! Three estimators of the same expectation are provided:
//!
//! * `Definition`: ∫e^{U₁+U₂} / (∫e^{U₁}·∫e^{U₂}), the circular average of
//!   the shifted form. Its per-sample variance is by far the smallest.
//! * `Shifted`: L / (∫e^{U₁}·∫e^{U₂}), the same quantity evaluated at the
//!   pinned point only.
//! * `Wedge`: the shifted form with U_k = v_k·V built from a planar bridge.
//!
//! On a uniform grid with the trapezoidal rule the three are equal in
//! expectation exactly, because the discrete mean-removed bridge is itself
//! invariant under circular shifts of the grid.

mod fit;

pub use fit::{fit_exponent, FitPoint, FitResult};

use std::fmt;
use std::str::FromStr;

use crate::bridges::{fill_bridge, fill_correlated_pair, log_trapezoid_exp, CorrelationSpec, V1, V2};
use crate::error::{ensure, invalid, Error, Result};
use crate::rng::SeedStream;
use crate::stats::{chunked, merge_all, Moments};

const CHUNK: usize = 64;

/// Which integrand is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorForm {
    Definition,
    Shifted,
    Wedge,
}

impl EstimatorForm {
    pub const ALL: [EstimatorForm; 3] = [Self::Definition, Self::Shifted, Self::Wedge];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Definition => "definition",
            Self::Shifted => "shifted",
            Self::Wedge => "wedge",
        }
    }
}

impl fmt::Display for EstimatorForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "definition" => Ok(Self::Definition),
            "shifted" => Ok(Self::Shifted),
            "wedge" => Ok(Self::Wedge),
            other => Err(invalid(format!(
                "unknown estimator form `{other}` (expected definition, shifted or wedge)"
            ))),
        }
    }
}

/// How the two bridges U₁, U₂ are related.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Cross-correlation r, marginal variance 2x(L−x)/L.
    Correlated(CorrelationSpec),
    /// U₁ = U₂.
    Identical,
    /// U₂ an independent copy; estimated as L·E[1/∫e^{U₁}]·E[1/∫e^{U₂}]
    /// with the two means taken over independent paths.
    IndependentProduct,
}

impl Coupling {
    pub fn half() -> Self {
        Coupling::Correlated(CorrelationSpec::new(0.5).expect("valid"))
    }

    pub fn r(&self) -> f64 {
        match self {
            Coupling::Correlated(spec) => spec.r(),
            Coupling::Identical => 1.0,
            Coupling::IndependentProduct => 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Coupling::Correlated(_) => "correlated",
            Coupling::Identical => "identical",
            Coupling::IndependentProduct => "independent",
        }
    }
}

/// Monte Carlo estimate of σ_L².
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub l: f64,
    pub form: EstimatorForm,
    pub coupling: Coupling,
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_grid: usize,
    pub seed: u64,
}

impl SigmaEstimate {
    pub fn r(&self) -> f64 {
        self.coupling.r()
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean
    }
}

/// Default grid: max(1024, 64·L) intervals.
pub fn default_grid(l: f64) -> usize {
    ((64.0 * l).ceil() as usize).max(1024)
}

/// Full description of one σ² estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaRun {
    pub l: f64,
    pub form: EstimatorForm,
    pub coupling: Coupling,
    pub n_samples: usize,
    pub n_grid: usize,
    pub seed: u64,
    /// Average each sample with its path-negated twin.
    pub antithetic: bool,
}

impl SigmaRun {
    pub fn new(l: f64, form: EstimatorForm, coupling: Coupling, n_samples: usize, seed: u64) -> Self {
        Self {
            l,
            form,
            coupling,
            n_samples,
            n_grid: default_grid(l),
            seed,
            antithetic: false,
        }
    }

    pub fn with_grid(mut self, n_grid: usize) -> Self {
        self.n_grid = n_grid;
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    fn validate(&self) -> Result<()> {
        ensure(self.l.is_finite() && self.l >= 1.0, || {
            format!("L must be at least 1, got {}", self.l)
        })?;
        ensure(self.n_samples >= 100, || {
            format!("need at least 100 samples, got {}", self.n_samples)
        })?;
        ensure(self.n_grid >= 2, || format!("grid too small: {}", self.n_grid))?;
        match (self.form, self.coupling) {
            (EstimatorForm::Wedge, Coupling::Correlated(spec)) if spec.r() == 0.5 => Ok(()),
            (EstimatorForm::Wedge, _) => Err(invalid(
                "the wedge form only exists for correlation r = 1/2",
            )),
            (EstimatorForm::Definition, Coupling::IndependentProduct) => {
                Err(invalid("the independent product estimator uses the shifted form"))
            }
            _ => Ok(()),
        }
    }

    pub fn run(&self) -> Result<SigmaEstimate> {
        self.validate()?;
        let stream = SeedStream::new(self.seed);
        let (mean, std_error) = match self.coupling {
            Coupling::IndependentProduct => self.run_product(stream),
            _ => {
                let m = self.run_moments(stream);
                (m.mean, m.std_error())
            }
        };
        Ok(SigmaEstimate {
            l: self.l,
            form: self.form,
            coupling: self.coupling,
            mean,
            std_error,
            n_samples: self.n_samples,
            n_grid: self.n_grid,
            seed: self.seed,
        })
    }

    fn run_moments(&self, stream: SeedStream) -> Moments {
        let n1 = self.n_grid + 1;
        let dx = self.l / self.n_grid as f64;
        let parts = chunked(self.n_samples, CHUNK, |range| {
            let mut u1 = vec![0.0; n1];
            let mut u2 = vec![0.0; n1];
            let mut scratch = vec![0.0; n1];
            let mut m = Moments::default();
            for i in range {
                let mut rng = stream.rng(i as u64);
                self.fill_paths(&mut rng, &mut u1, &mut u2, &mut scratch);
                let mut v = self.integrand(&u1, &u2, dx, &mut scratch);
                if self.antithetic {
                    negate(&mut u1);
                    negate(&mut u2);
                    v = 0.5 * (v + self.integrand(&u1, &u2, dx, &mut scratch));
                }
                debug_assert!(v.is_finite() && v > 0.0, "non-positive integrand {v}");
                m.push(v);
            }
            m
        });
        merge_all(&parts)
    }

    fn fill_paths(
        &self,
        rng: &mut crate::rng::StreamRng,
        u1: &mut [f64],
        u2: &mut [f64],
        scratch: &mut [f64],
    ) {
        match (self.form, self.coupling) {
            (EstimatorForm::Wedge, _) => {
                // planar bridge V, then U_k = v_k·V
                fill_bridge(rng, self.l, u1);
                fill_bridge(rng, self.l, u2);
                for (a, b) in u1.iter_mut().zip(u2.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = V1.re * x + V1.im * y;
                    *b = V2.re * x + V2.im * y;
                }
            }
            (_, Coupling::Correlated(spec)) => fill_correlated_pair(rng, self.l, spec, u1, u2, scratch),
            (_, Coupling::Identical) => {
                fill_bridge(rng, self.l, u1);
                let s = std::f64::consts::SQRT_2;
                for (a, b) in u1.iter_mut().zip(u2.iter_mut()) {
                    *a *= s;
                    *b = *a;
                }
            }
            (_, Coupling::IndependentProduct) => unreachable!("handled by run_product"),
        }
    }

    fn integrand(&self, u1: &[f64], u2: &[f64], dx: f64, scratch: &mut [f64]) -> f64 {
        match self.form {
            EstimatorForm::Definition => definition_integrand_with(u1, u2, dx, scratch),
            EstimatorForm::Shifted | EstimatorForm::Wedge => shifted_integrand(u1, u2, dx, self.l),
        }
    }

    fn run_product(&self, stream: SeedStream) -> (f64, f64) {
        let n1 = self.n_grid + 1;
        let dx = self.l / self.n_grid as f64;
        let s = std::f64::consts::SQRT_2;
        let parts = chunked(self.n_samples, CHUNK, |range| {
            let mut u = vec![0.0; n1];
            let (mut ma, mut mb) = (Moments::default(), Moments::default());
            for i in range {
                let mut rng = stream.rng(i as u64);
                for m in [&mut ma, &mut mb] {
                    fill_bridge(&mut rng, self.l, &mut u);
                    u.iter_mut().for_each(|v| *v *= s);
                    let mut inv = (-log_trapezoid_exp(&u, dx)).exp();
                    if self.antithetic {
                        negate(&mut u);
                        inv = 0.5 * (inv + (-log_trapezoid_exp(&u, dx)).exp());
                    }
                    m.push(inv);
                }
            }
            (ma, mb)
        });
        let a = merge_all(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
        let b = merge_all(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
        let mean = self.l * a.mean * b.mean;
        let se = self.l
            * ((b.mean * a.std_error()).powi(2) + (a.mean * b.std_error()).powi(2)).sqrt();
        (mean, se)
    }
}

fn negate(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = -*x);
}

/// Weighted sums Σ w e^{u−max} used by the trapezoidal rule.
fn trapezoid_sums(u1: &[f64], u2: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = u1.len();
    let m1 = u1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m2 = u2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let e1 = (u1[i] - m1).exp();
        let e2 = (u2[i] - m2).exp();
        s1 += w * e1;
        s2 += w * e2;
        s12 += w * e1 * e2;
    }
    (m1, m2, s1, s2, s12)
}

/// ∫e^{U₁+U₂} / (∫e^{U₁}·∫e^{U₂}) on a uniform grid.
pub fn definition_integrand(u1: &[f64], u2: &[f64], dx: f64) -> f64 {
    let mut scratch = vec![0.0; u1.len()];
    definition_integrand_with(u1, u2, dx, &mut scratch)
}

fn definition_integrand_with(u1: &[f64], u2: &[f64], dx: f64, scratch: &mut [f64]) -> f64 {
    let (_, _, s1, s2, s12) = trapezoid_sums(u1, u2);
    if s12 > 1e-250 {
        return s12 / (dx * s1 * s2);
    }
    // the two maxima sit far apart; redo the cross term in log space
    for ((s, a), b) in scratch.iter_mut().zip(u1).zip(u2) {
        *s = a + b;
    }
    (log_trapezoid_exp(scratch, dx) - log_trapezoid_exp(u1, dx) - log_trapezoid_exp(u2, dx)).exp()
}

/// L / (∫e^{U₁}·∫e^{U₂}) on a uniform grid.
pub fn shifted_integrand(u1: &[f64], u2: &[f64], dx: f64, l: f64) -> f64 {
    let (m1, m2, s1, s2, _) = trapezoid_sums(u1, u2);
    (l.ln() - 2.0 * dx.ln() - m1 - m2 - s1.ln() - s2.ln()).exp()
}

/// Pathwise upper bound L / (L e^{min U₁} · L e^{min U₂}) for the shifted form.
pub fn shifted_bound(u1: &[f64], u2: &[f64], l: f64) -> f64 {
    let min1 = u1.iter().copied().fold(f64::INFINITY, f64::min);
    let min2 = u2.iter().copied().fold(f64::INFINITY, f64::min);
    (-min1 - min2).exp() / l
}

/// σ_L² for the correlation-1/2 pair in the requested form.
pub fn estimate_sigma2(
    l: f64,
    n_samples: usize,
    n_grid: usize,
    form: EstimatorForm,
    seed: u64,
) -> Result<SigmaEstimate> {
    SigmaRun::new(l, form, Coupling::half(), n_samples, seed)
        .with_grid(n_grid)
        .run()
}

/// The decay-rate quantity for a general correlation r ∈ [0, 1), estimated
/// with the circularly averaged (definition) integrand.
pub fn estimate_sigma2_r(l: f64, r: f64, n_samples: usize, n_grid: usize, seed: u64) -> Result<SigmaEstimate> {
    ensure((0.0..1.0).contains(&r), || {
        format!("r must lie in [0, 1) (use the identical-bridge variant for r = 1), got {r}")
    })?;
    let spec = CorrelationSpec::new(r)?;
    SigmaRun::new(l, EstimatorForm::Definition, Coupling::Correlated(spec), n_samples, seed)
        .with_grid(n_grid)
        .run()
}

/// L·(E[1/∫e^{U}])² with the two factors averaged over independent paths.
/// Its exact value is 1/L.
pub fn independent_bridge_sigma2(l: f64, n_samples: usize, n_grid: usize, seed: u64) -> Result<SigmaEstimate> {
    SigmaRun::new(l, EstimatorForm::Shifted, Coupling::IndependentProduct, n_samples, seed)
        .with_grid(n_grid)
        .run()
}

/// L·E[(∫e^{U})^{-2}] for U₁ = U₂.
pub fn identical_bridge_sigma2(l: f64, n_samples: usize, n_grid: usize, seed: u64) -> Result<SigmaEstimate> {
    SigmaRun::new(l, EstimatorForm::Shifted, Coupling::Identical, n_samples, seed)
        .with_grid(n_grid)
        .run()
}

/// Predicted decay exponent 1 − π/(π − arccos r).
pub fn predicted_exponent(r: f64) -> Result<f64> {
    ensure((0.0..1.0).contains(&r), || format!("r must lie in [0, 1), got {r}"))?;
    let pi = std::f64::consts::PI;
    Ok(1.0 - pi / (pi - r.acos()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridges::{sample_correlated_pair, sample_planar_bridge};

    #[test]
    fn predicted_exponents() {
        assert!((predicted_exponent(0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((predicted_exponent(0.5).unwrap() + 0.5).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((predicted_exponent(r).unwrap() + 1.0 / 3.0).abs() < 1e-14);
        assert!(predicted_exponent(1.0 - 1e-12).unwrap().abs() < 1e-5);
        assert!(predicted_exponent(1.0).is_err());
        assert!(predicted_exponent(-0.2).is_err());
    }

    #[test]
    fn constant_paths() {
        let z = vec![0.0; 65];
        let dx = 4.0 / 64.0;
        assert!((definition_integrand(&z, &z, dx) - 0.25).abs() < 1e-14);
        assert!((shifted_integrand(&z, &z, dx, 4.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn far_apart_maxima_fall_back_to_log_space() {
        let n = 65;
        let u1: Vec<f64> = (0..n).map(|i| if i == 10 { 300.0 } else { -300.0 }).collect();
        let u2: Vec<f64> = (0..n).map(|i| if i == 50 { 300.0 } else { -300.0 }).collect();
        let v = definition_integrand(&u1, &u2, 1.0);
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn shifted_samples_respect_pathwise_bound() {
        let spec = CorrelationSpec::new(0.5).unwrap();
        for seed in 0..200 {
            let (a, b) = sample_correlated_pair(16.0, 256, spec, seed).unwrap();
            let v = shifted_integrand(a.values(), b.values(), a.spacing(), 16.0);
            assert!(v.is_finite() && v > 0.0);
            assert!(v <= shifted_bound(a.values(), b.values(), 16.0) * (1.0 + 1e-12));
            let d = definition_integrand(a.values(), b.values(), a.spacing());
            assert!(d.is_finite() && d > 0.0);
        }
        for seed in 0..50 {
            let v = sample_planar_bridge(16.0, 256, seed).unwrap();
            let (a, b) = v.correlated_pair();
            let w = shifted_integrand(a.values(), b.values(), a.spacing(), 16.0);
            assert!(w <= shifted_bound(a.values(), b.values(), 16.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn invalid_combinations() {
        let quarter = Coupling::Correlated(CorrelationSpec::new(0.25).unwrap());
        assert!(SigmaRun::new(8.0, EstimatorForm::Wedge, quarter, 100, 1).run().is_err());
        assert!(SigmaRun::new(0.5, EstimatorForm::Shifted, Coupling::half(), 100, 1).run().is_err());
        assert!(SigmaRun::new(8.0, EstimatorForm::Shifted, Coupling::half(), 99, 1).run().is_err());
        assert!(estimate_sigma2_r(8.0, 1.0, 100, 64, 1).is_err());
        assert!("bogus".parse::<EstimatorForm>().is_err());
        assert_eq!("wedge".parse::<EstimatorForm>().unwrap(), EstimatorForm::Wedge);
    }

    #[test]
    fn estimates_are_reproducible() {
        let a = estimate_sigma2(4.0, 300, 128, EstimatorForm::Definition, 5).unwrap();
        let b = estimate_sigma2(4.0, 300, 128, EstimatorForm::Definition, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.mean > 0.0 && a.std_error > 0.0);
    }
}
