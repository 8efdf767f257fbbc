//! Pearson correlation and its two-sided significance test.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::special::student_t_two_sided;

/// Two paired measurement vectors of equal length.
#[derive(Debug, Clone)]
pub struct PairedSample<T> {
    xs: Vec<T>,
    ys: Vec<T>,
}

impl<T: Scalar> PairedSample<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Shape(format!(
                "paired sample lengths differ: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("paired sample contains non-finite values".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }
}

/// Correlation coefficient with its two-sided p-value and sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub m: usize,
}

/// Pearson correlation coefficient, clipped to [-1, 1] against
/// floating-point overshoot.
pub fn pearson_r<T: Scalar>(sample: &PairedSample<T>) -> Result<T> {
    let m = sample.len();
    if m < 2 {
        return Err(Error::Data("pearson_r needs at least two pairs".into()));
    }
    let count = T::of(m as f64);
    let mean_x = sample.xs.iter().cloned().sum::<T>() / count;
    let mean_y = sample.ys.iter().cloned().sum::<T>() / count;

    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in sample.xs.iter().zip(&sample.ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::Data("zero variance: correlation undefined".into()));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.min(T::one()).max(-T::one()))
}

/// Two-sided p-value for a Pearson coefficient under the null of no
/// correlation: `t = r sqrt((m-2)/(1-r^2))` referred to Student-t with
/// `m-2` degrees of freedom.
pub fn p_value_two_sided(r: f64, m: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::Data("significance test needs m >= 3".into()));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Data(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let nu = (m - 2) as f64;
    let t = r * (nu / (1.0 - r * r)).sqrt();
    Ok(student_t_two_sided(t, nu))
}

/// Convenience wrapper producing the full result for a sample.
pub fn correlate<T: Scalar>(sample: &PairedSample<T>) -> Result<CorrelationResult> {
    let r = pearson_r(sample)?.as_f64();
    let p = p_value_two_sided(r, sample.len())?;
    Ok(CorrelationResult {
        r,
        p,
        m: sample.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(xs: &[f64], ys: &[f64]) -> PairedSample<f64> {
        PairedSample::new(xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn identical_and_negated_series_hit_the_extremes() {
        let xs = [1.0, 2.0, 5.0, -3.0];
        assert_eq!(pearson_r(&sample(&xs, &xs)).unwrap(), 1.0);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(pearson_r(&sample(&xs, &neg)).unwrap(), -1.0);
    }

    #[test]
    fn small_example_matches_direct_evaluation() {
        // xs=(1,2,3), ys=(1,2,4): r = 3 / (sqrt(2) * sqrt(14/3)).
        let r = pearson_r(&sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])).unwrap();
        let expected = 3.0 / (2.0f64.sqrt() * (14.0f64 / 3.0).sqrt());
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.98198).abs() < 1e-5);
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(pearson_r(&sample(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])).is_err());
        assert!(pearson_r(&sample(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0])).is_err());
    }

    #[test]
    fn null_correlation_gives_p_one() {
        for m in [3, 10, 100] {
            assert_eq!(p_value_two_sided(0.0, m).unwrap(), 1.0);
        }
        assert_eq!(p_value_two_sided(1.0, 10).unwrap(), 0.0);
        assert!(p_value_two_sided(0.5, 2).is_err());
    }

    #[test]
    fn p_value_example_matches_t_density_quadrature() {
        // Independent oracle: Simpson quadrature of the t density on [0, |t|]
        // with the normalizing constant from statrs' log-gamma.
        let oracle = |r: f64, m: usize| -> f64 {
            let nu = (m - 2) as f64;
            let t = r * (nu / (1.0 - r * r)).sqrt();
            let ln_norm = statrs::function::gamma::ln_gamma(0.5 * (nu + 1.0))
                - statrs::function::gamma::ln_gamma(0.5 * nu)
                - 0.5 * (nu * std::f64::consts::PI).ln();
            let density = |x: f64| (ln_norm - 0.5 * (nu + 1.0) * (1.0 + x * x / nu).ln()).exp();
            let (a, b, n) = (0.0, t.abs(), 100_000);
            let h = (b - a) / n as f64;
            let mut acc = density(a) + density(b);
            for i in 1..n {
                let w = if i % 2 == 0 { 2.0 } else { 4.0 };
                acc += w * density(a + i as f64 * h);
            }
            1.0 - 2.0 * (acc * h / 3.0)
        };

        let p = p_value_two_sided(0.5, 12).unwrap();
        assert!((p - oracle(0.5, 12)).abs() < 1e-9, "p {p}");
        assert!((p - 0.098).abs() < 1e-3);

        let strong = p_value_two_sided(0.86, 120).unwrap();
        assert!(strong < 0.01);
        assert!((strong - oracle(0.86, 120)).abs() < 1e-9);
    }

    #[test]
    fn p_value_is_monotone_in_r_and_m() {
        let mut last = 1.0;
        for i in 1..20 {
            let r = i as f64 * 0.05;
            let p = p_value_two_sided(r, 30).unwrap();
            assert!(p < last, "p not decreasing at r={r}");
            last = p;
        }
        let mut last = 1.0;
        for m in [4, 8, 16, 32, 64, 128] {
            let p = p_value_two_sided(0.3, m).unwrap();
            assert!(p < last, "p not decreasing at m={m}");
            last = p;
        }
    }

    proptest! {
        #[test]
        fn affine_invariance_and_sign_flip(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 4..40),
            scale in 0.01f64..50.0,
            shift in -100.0f64..100.0,
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let base = match pearson_r(&sample(&xs, &ys)) {
                Ok(r) => r,
                Err(_) => return Ok(()), // degenerate draw
            };
            let xs_t: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            let transformed = pearson_r(&sample(&xs_t, &ys)).unwrap();
            prop_assert!((base - transformed).abs() < 1e-12);

            let ys_n: Vec<f64> = ys.iter().map(|y| -y).collect();
            let negated = pearson_r(&sample(&xs, &ys_n)).unwrap();
            prop_assert!((base + negated).abs() < 1e-12);
        }
    }
}
