//! Ordinary least squares with a confidence band for the mean response.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::correlation::PairedSample;
use crate::stats::special::student_t_quantile;

/// An OLS fit `y = slope * x + intercept` with everything needed to evaluate
/// the confidence band of the mean response at any x.
#[derive(Debug, Clone, Copy)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub m: usize,
    pub x_mean: f64,
    sxx: f64,
    resid_se: f64,
    t_crit: f64,
}

impl RegressionFit {
    /// Half-width of the confidence interval for the mean response at `x`:
    /// `t_crit * s * sqrt(1/m + (x - x_mean)^2 / Sxx)`.
    pub fn band_half_width(&self, x: f64) -> f64 {
        let dx = x - self.x_mean;
        self.t_crit * self.resid_se * (1.0 / self.m as f64 + dx * dx / self.sxx).sqrt()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Least-squares line with a confidence band at the given level
/// (e.g. 0.95 for the usual 95% band).
pub fn linear_fit_with_ci<T: Scalar>(
    sample: &PairedSample<T>,
    confidence: f64,
) -> Result<RegressionFit> {
    let m = sample.len();
    if m < 3 {
        return Err(Error::Data("regression needs at least three points".into()));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::Config(format!(
            "confidence level {confidence} outside (0, 1)"
        )));
    }

    let xs: Vec<f64> = sample.xs().iter().map(|v| v.as_f64()).collect();
    let ys: Vec<f64> = sample.ys().iter().map(|v| v.as_f64()).collect();
    let mf = m as f64;
    let x_mean = xs.iter().sum::<f64>() / mf;
    let y_mean = ys.iter().sum::<f64>() / mf;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::Data("degenerate x: zero variance".into()));
    }

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let nu = (m - 2) as f64;
    let resid_se = (sse / nu).sqrt();
    let t_crit = student_t_quantile(0.5 * (1.0 + confidence), nu);

    Ok(RegressionFit {
        slope,
        intercept,
        m,
        x_mean,
        sxx,
        resid_se,
        t_crit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(xs: &[f64], ys: &[f64]) -> PairedSample<f64> {
        PairedSample::new(xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn exact_line_has_zero_band() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_fit_with_ci(&sample(&xs, &ys), 0.95).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        for &x in &[-5.0, 0.0, 1.5, 10.0] {
            assert!(fit.band_half_width(x).abs() < 1e-12);
        }
    }

    #[test]
    fn two_points_are_rejected() {
        assert!(linear_fit_with_ci(&sample(&[0.0, 1.0], &[0.0, 1.0]), 0.95).is_err());
    }

    #[test]
    fn band_is_narrowest_at_the_mean() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + (x * 7.0).sin()).collect();
        let fit = linear_fit_with_ci(&sample(&xs, &ys), 0.95).unwrap();
        let at_mean = fit.band_half_width(fit.x_mean);
        for &x in &[-3.0, 0.0, 5.0, 19.0, 30.0] {
            assert!(fit.band_half_width(x) >= at_mean);
        }
        assert!(at_mean > 0.0);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream(33, 0);
        let xs: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 10.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x - 2.0 + (rng.random::<f64>() - 0.5))
            .collect();

        // Independent oracle: solve the 2x2 normal equations directly.
        let m = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let det = m * sxx - sx * sx;
        let slope = (m * sxy - sx * sy) / det;
        let intercept = (sy * sxx - sx * sxy) / det;

        let fit = linear_fit_with_ci(&sample(&xs, &ys), 0.95).unwrap();
        assert!((fit.slope - slope).abs() < 1e-10);
        assert!((fit.intercept - intercept).abs() < 1e-10);
    }
}
