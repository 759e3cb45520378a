use crate::error::{ensure, invalid, Result};

/// One input point of a power-law fit: (L, estimate, standard error).
pub type FitPoint = (f64, f64, f64);

/// Weighted least squares of log(value) on log(L).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_std_error: f64,
    /// Twice the slope standard error.
    pub slope_halfwidth: f64,
    /// (log L, log value, weight)
    pub points: Vec<(f64, f64, f64)>,
    /// Weighted residual sum of squares.
    pub chi2: f64,
}

impl FitResult {
    pub fn residuals(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|(x, y, _)| y - (self.intercept + self.slope * x))
            .collect()
    }

    /// Whether `target` lies within `tolerance` of the fitted slope.
    pub fn slope_within(&self, target: f64, tolerance: f64) -> bool {
        (self.slope - target).abs() <= tolerance
    }
}

/// Fits value ≈ e^{intercept}·L^{slope}.
///
/// Weights are inverse relative variances (estimate/std_error)², and the
/// slope error is the known-variance one, 1/√(Σw(x−x̄)²). When every
/// standard error is zero the points are weighted equally and the slope
/// error comes from the residuals instead.
pub fn fit_exponent(points: &[FitPoint]) -> Result<FitResult> {
    ensure(points.len() >= 3, || {
        format!("need at least 3 points to fit, got {}", points.len())
    })?;
    for &(l, v, se) in points {
        ensure(l > 0.0 && l.is_finite(), || format!("abscissa must be positive, got {l}"))?;
        ensure(v > 0.0 && v.is_finite(), || format!("estimate must be positive, got {v}"))?;
        ensure(se >= 0.0 && se.is_finite(), || format!("standard error must be non-negative, got {se}"))?;
    }
    let exact = points.iter().all(|p| p.2 == 0.0);
    if !exact && points.iter().any(|p| p.2 == 0.0) {
        return Err(invalid("standard errors must be all zero or all positive"));
    }
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(l, v, se)| {
            let w = if exact { 1.0 } else { (v / se).powi(2) };
            (l.ln(), v.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xbar = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    ensure(sxx > 1e-12 * sw, || "abscissae must not all coincide".into())?;
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let chi2: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let slope_std_error = if exact {
        (chi2 / (pts.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        (1.0 / sxx).sqrt()
    };
    Ok(FitResult {
        slope,
        intercept,
        slope_std_error,
        slope_halfwidth: 2.0 * slope_std_error,
        points: pts,
        chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_power_law() {
        let pts: Vec<FitPoint> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&l: &f64| (l, 7.0 * l.powf(-0.5), 0.0))
            .collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-13);
        assert!(fit.slope_halfwidth < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_exponent(&[(1.0, 1.0, 0.1), (2.0, 1.0, 0.1)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0, 0.1), (2.0, -1.0, 0.1), (3.0, 1.0, 0.1)]).is_err());
        assert!(fit_exponent(&[(1.0, 1.0, 0.1), (2.0, 1.0, 0.0), (3.0, 1.0, 0.1)]).is_err());
        assert!(fit_exponent(&[(2.0, 1.0, 0.1), (2.0, 1.1, 0.1), (2.0, 1.0, 0.1)]).is_err());
    }

    #[test]
    fn synthetic_noise_coverage() {
        // 5% relative noise around 3·L^{-0.7}; the ±halfwidth band should
        // cover the truth in at least 90 of 100 repetitions.
        let stream = SeedStream::new(2024);
        let ls = [16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = stream.rng(rep);
            let pts: Vec<FitPoint> = ls
                .iter()
                .map(|&l: &f64| {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = 3.0 * l.powf(-0.7) * (1.0 + 0.05 * z);
                    (l, v, 0.05 * v)
                })
                .collect();
            let fit = fit_exponent(&pts).unwrap();
            if (fit.slope + 0.7).abs() <= fit.slope_halfwidth {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }
}
