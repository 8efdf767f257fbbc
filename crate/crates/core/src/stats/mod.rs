//! Correlation analysis: Pearson coefficient, two-sided significance, and
//! linear regression with confidence bands.

mod correlation;
mod regression;
mod special;

pub use correlation::{correlate, p_value_two_sided, pearson_r, CorrelationResult, PairedSample};
pub use regression::{linear_fit_with_ci, RegressionFit};
pub use special::{inc_beta, ln_gamma, student_t_cdf, student_t_quantile, student_t_two_sided};
