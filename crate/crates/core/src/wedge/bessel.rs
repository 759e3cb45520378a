//! Modified Bessel functions of the first kind, I_ν(z), for real ν, z ≥ 0.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Largest supported argument.
pub const Z_MAX: f64 = 700.0;
/// Largest supported order.
pub const NU_MAX: f64 = 200.0;
/// Relative tolerance of the series/quadrature cross-check.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

const RESCALE: f64 = 1e250;

fn check_range(nu: f64, z: f64) -> Result<()> {
    if !(nu >= 0.0 && nu <= NU_MAX) || !(z >= 0.0 && z <= Z_MAX) {
        return Err(Error::OutOfRange(format!(
            "I_nu(z) supported for 0 <= nu <= {NU_MAX}, 0 <= z <= {Z_MAX}; got nu = {nu}, z = {z}"
        )));
    }
    Ok(())
}

/// ln I_ν(z) from the ascending series, without range checks.
pub(crate) fn log_series_unchecked(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let half = 0.5 * z;
    let log_t0 = nu * half.ln() - libm::lgamma(nu + 1.0);
    let q = half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut offset = 0.0;
    let mut k = 0.0;
    loop {
        term *= q / ((k + 1.0) * (nu + k + 1.0));
        sum += term;
        k += 1.0;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            offset += RESCALE.ln();
        }
        // terms decrease once k(k+ν) > (z/2)²
        if k * (k + nu) > q && term <= sum * 1e-17 {
            break;
        }
    }
    log_t0 + sum.ln() + offset
}

/// ln I_ν(z) from the power series Σ (z/2)^{ν+2k}/(k! Γ(ν+k+1)).
pub fn log_bessel_i(nu: f64, z: f64) -> Result<f64> {
    check_range(nu, z)?;
    Ok(log_series_unchecked(nu, z))
}

/// I_ν(z) from the power series.
pub fn bessel_i_series(nu: f64, z: f64) -> Result<f64> {
    log_bessel_i(nu, z).map(f64::exp)
}

fn gauss16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Breakpoints on [0, π]: uniform panels, with the two end panels split
/// geometrically towards the endpoints where sin^{2ν} is not smooth.
fn breakpoints() -> &'static [f64] {
    static POINTS: OnceLock<Vec<f64>> = OnceLock::new();
    POINTS.get_or_init(|| {
        let panels = 256;
        let levels = 48;
        let pi = std::f64::consts::PI;
        let h = pi / panels as f64;
        let mut pts = vec![0.0];
        for k in (0..levels).rev() {
            pts.push(h * 0.5f64.powi(k));
        }
        for i in 2..panels {
            pts.push(i as f64 * h);
        }
        for k in 0..levels {
            pts.push(pi - h * 0.5f64.powi(k));
        }
        pts.push(pi);
        pts
    })
}

/// I_ν(z) from the integral representation
/// (z/2)^ν/(√π Γ(ν+½)) ∫₀^π e^{z cos η} sin^{2ν}η dη.
pub fn bessel_i_quadrature(nu: f64, z: f64) -> Result<f64> {
    check_range(nu, z)?;
    if z == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    // peak of z cos η + 2ν ln sin η
    let c = if nu == 0.0 { 1.0 } else { (-nu + (nu * nu + z * z).sqrt()) / z };
    let peak = z * c + if nu == 0.0 { 0.0 } else { nu * (1.0 - c * c).ln() };
    let f = |eta: f64| {
        let s = eta.sin();
        if s <= 0.0 {
            return if nu == 0.0 { (z * eta.cos() - peak).exp() } else { 0.0 };
        }
        (z * eta.cos() + 2.0 * nu * s.ln() - peak).exp()
    };
    let rule = gauss16();
    let pts = breakpoints();
    let integral: f64 = pts.windows(2).map(|w| rule.integrate(w[0], w[1], &f)).sum();
    let log_pref = nu * (0.5 * z).ln() - 0.5 * std::f64::consts::PI.ln() - libm::lgamma(nu + 0.5);
    Ok((log_pref + peak + integral.ln()).exp())
}

/// I_ν(z): the series value, after checking it against the quadrature
/// route to relative [`CROSS_CHECK_TOL`].
pub fn bessel_i(nu: f64, z: f64) -> Result<f64> {
    let series = bessel_i_series(nu, z)?;
    let quad = bessel_i_quadrature(nu, z)?;
    let scale = series.abs().max(quad.abs());
    let rel = if scale == 0.0 { 0.0 } else { (series - quad).abs() / scale };
    if rel > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck {
            what: format!("I_{nu}({z})"),
            first: series,
            second: quad,
            rel_diff: rel,
        });
    }
    Ok(series)
}

/// e^{-z} I_ν(z), evaluated in log space.
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    Ok((log_bessel_i(nu, z)? - z).exp())
}

/// The bounds (z/2)^ν e^{∓z}/Γ(ν+1) that sandwich I_ν(z).
pub fn sandwich_bounds(nu: f64, z: f64) -> (f64, f64) {
    let base = nu * (0.5 * z).ln() - libm::lgamma(nu + 1.0);
    ((base - z).exp(), (base + z).exp())
}
