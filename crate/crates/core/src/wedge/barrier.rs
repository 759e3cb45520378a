use crate::error::{ensure, Result};
use crate::quadrature::GaussLegendre;

/// Symmetric C² cutoff: 0 on [−1, 1], 1 outside [−2, 2], quintic
/// smoothstep in between.
pub fn smooth_cutoff(x: f64) -> f64 {
    let t = (x.abs() - 1.0).clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (6.0 * t - 15.0))
}

fn barrier_density(x: f64, l: f64, gamma: f64) -> f64 {
    let chi = smooth_cutoff(x) * smooth_cutoff(x - 0.5 * l) * smooth_cutoff(x - l);
    if chi == 0.0 {
        return 0.0;
    }
    let d = x.min(l - x);
    let sign = if x < 0.5 * l { 1.0 } else { -1.0 };
    gamma * chi * sign * d.powf(gamma - 1.0)
}

/// The curved barrier q(y) = γ∫₀^y χ_L(x) sgn(L/2−x) [x∧(L−x)]^{γ−1} dx
/// at the n + 1 grid points y = iL/n, with χ_L(x) = χ(x)χ(x−L/2)χ(x−L).
pub fn barrier_profile(l: f64, gamma: f64, n: usize) -> Result<Vec<f64>> {
    ensure(l >= 4.0 && l.is_finite(), || format!("L must be at least 4, got {l}"))?;
    ensure(gamma > 0.0 && gamma < 0.5, || format!("gamma must lie in (0, 1/2), got {gamma}"))?;
    ensure(n >= 2, || format!("grid too small: {n}"))?;
    let rule = GaussLegendre::new(8);
    let dx = l / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..n {
        let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
        // split cells at the kinks of the cutoff
        let mut cuts = vec![a];
        for k in [1.0, 2.0, 0.5 * l - 2.0, 0.5 * l - 1.0, 0.5 * l, 0.5 * l + 1.0, 0.5 * l + 2.0, l - 2.0, l - 1.0] {
            if k > a && k < b {
                cuts.push(k);
            }
        }
        cuts.push(b);
        for w in cuts.windows(2) {
            acc += rule.integrate(w[0], w[1], |x| barrier_density(x, l, gamma));
        }
        out.push(acc);
    }
    Ok(out)
}
