//! Parameter storage and the Adam update.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A flat parameter array together with its gradient and Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub adam_m: Vec<T>,
    pub adam_v: Vec<T>,
    pub step_count: u64,
}

impl<T: Scalar> ParamBlock<T> {
    pub fn zeros(len: usize) -> Self {
        Self::from_values(vec![T::zero(); len])
    }

    pub fn from_values(value: Vec<T>) -> Self {
        let len = value.len();
        Self {
            value,
            grad: vec![T::zero(); len],
            adam_m: vec![T::zero(); len],
            adam_v: vec![T::zero(); len],
            step_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Clears Adam moments and the step counter, keeping values and grads.
    pub fn reset_optimizer(&mut self) {
        self.adam_m.iter_mut().for_each(|m| *m = T::zero());
        self.adam_v.iter_mut().for_each(|v| *v = T::zero());
        self.step_count = 0;
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::of(0.001),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
        }
    }
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn with_learning_rate(learning_rate: T) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: T| x > T::zero() && x < T::one();
        if !(self.learning_rate > T::zero()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in (0,1)".into()));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One Adam step with bias correction over the block's gradient.
///
/// Non-finite gradient entries abort the surrounding run: they signal
/// divergence, and the moment estimates would be poisoned from then on.
pub fn adam_step<T: Scalar>(param: &mut ParamBlock<T>, config: &OptimizerConfig<T>) -> Result<()> {
    if param.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence("non-finite gradient in adam_step".into()));
    }
    param.step_count += 1;
    let t = param.step_count as i32;
    let one = T::one();
    let m_corr = one - config.beta1.powi(t);
    let v_corr = one - config.beta2.powi(t);
    for i in 0..param.value.len() {
        let g = param.grad[i];
        param.adam_m[i] = config.beta1 * param.adam_m[i] + (one - config.beta1) * g;
        param.adam_v[i] = config.beta2 * param.adam_v[i] + (one - config.beta2) * g * g;
        let m_hat = param.adam_m[i] / m_corr;
        let v_hat = param.adam_v[i] / v_corr;
        param.value[i] = param.value[i] - config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_value_unchanged() {
        let mut p = ParamBlock::<f64>::from_values(vec![1.5, -0.25]);
        adam_step(&mut p, &OptimizerConfig::default()).unwrap();
        assert_eq!(p.value, vec![1.5, -0.25]);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn single_step_with_unit_gradient_moves_by_learning_rate() {
        let mut p = ParamBlock::<f64>::from_values(vec![0.0]);
        p.grad[0] = 1.0;
        adam_step(&mut p, &OptimizerConfig::default()).unwrap();
        // m_hat = v_hat = 1, so the step is -lr / (1 + eps).
        assert!((p.value[0] + 0.001).abs() < 1e-9, "got {}", p.value[0]);
    }

    #[test]
    fn ten_steps_match_scalar_recurrence_oracle() {
        // Independent scalar recurrence with constant gradient 1.
        let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
        let mut theta = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=10 {
            m = b1 * m + (1.0 - b1);
            v = b2 * v + (1.0 - b2);
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        let mut p = ParamBlock::<f64>::from_values(vec![0.0]);
        for _ in 0..10 {
            p.grad[0] = 1.0;
            adam_step(&mut p, &OptimizerConfig::default()).unwrap();
        }
        assert!((p.value[0] - theta).abs() < 1e-12, "{} vs {}", p.value[0], theta);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = ParamBlock::<f64>::from_values(vec![0.0]);
        p.grad[0] = f64::NAN;
        assert!(matches!(
            adam_step(&mut p, &OptimizerConfig::default()),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn config_validation_rejects_out_of_range() {
        let mut c = OptimizerConfig::<f64>::default();
        c.beta1 = 1.0;
        assert!(c.validate().is_err());
        assert!(OptimizerConfig::<f64>::default().validate().is_ok());
    }
}
