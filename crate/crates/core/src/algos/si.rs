//! Synaptic-intelligence state: the per-parameter path accumulator, the
//! consolidated importance weights, and the quadratic penalty they define.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-parameter SI state over a set of parameter blocks (the trunk of a
/// multi-head network; heads are task-private and carry no importance).
#[derive(Debug, Clone)]
pub struct SiState<T> {
    /// Path accumulator, reset at each consolidation.
    pub omega: Vec<Vec<T>>,
    /// Consolidated importance, non-negative.
    pub importance: Vec<Vec<T>>,
    /// Reference parameters from the previous consolidation.
    pub anchor: Vec<Vec<T>>,
    /// Damping added to the squared displacement in the consolidation rule.
    pub xi: T,
    /// Regularization strength multiplying the penalty.
    pub c: T,
}

impl<T: Scalar> SiState<T> {
    /// Fresh state anchored at the given parameter values.
    pub fn new(anchor: Vec<Vec<T>>, xi: T, c: T) -> Result<Self> {
        if !(xi > T::zero()) {
            return Err(Error::Config("SI damping xi must be positive".into()));
        }
        let zeros: Vec<Vec<T>> = anchor.iter().map(|b| vec![T::zero(); b.len()]).collect();
        Ok(Self {
            omega: zeros.clone(),
            importance: zeros,
            anchor,
            xi,
            c,
        })
    }

    fn check_shapes(&self, other: &[Vec<T>], what: &str) -> Result<()> {
        if other.len() != self.anchor.len()
            || other.iter().zip(&self.anchor).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Shape(format!("{what} does not match SI state shapes")));
        }
        Ok(())
    }
}

/// Accumulates the running path integral after one optimizer step:
/// `omega += -grad * delta_theta`, elementwise.
///
/// `grad` is the gradient the step descended along and `delta_theta` the
/// realized parameter change, so a loss-reducing step contributes positively.
pub fn si_path_update<T: Scalar>(
    state: &mut SiState<T>,
    grads: &[Vec<T>],
    delta_theta: &[Vec<T>],
) -> Result<()> {
    state.check_shapes(grads, "gradient")?;
    state.check_shapes(delta_theta, "delta_theta")?;
    for (block, (g_block, d_block)) in state.omega.iter_mut().zip(grads.iter().zip(delta_theta)) {
        for (w, (&g, &d)) in block.iter_mut().zip(g_block.iter().zip(d_block)) {
            *w = *w - g * d;
        }
    }
    Ok(())
}

/// Task-boundary consolidation: folds the path accumulator into the
/// importance weights, clamps them at zero, then re-anchors.
///
/// `importance += omega / ((theta_end - anchor)^2 + xi)`, after which any
/// negative importance is clamped away (a negative quadratic penalty would
/// push parameters off the anchor), `omega` resets, and the anchor moves to
/// `theta_end`.
pub fn si_consolidate<T: Scalar>(state: &mut SiState<T>, theta_end: &[Vec<T>]) -> Result<()> {
    if !(state.xi > T::zero()) {
        return Err(Error::Config("SI damping xi must be positive".into()));
    }
    state.check_shapes(theta_end, "theta_end")?;
    for b in 0..state.importance.len() {
        for i in 0..state.importance[b].len() {
            let displacement = theta_end[b][i] - state.anchor[b][i];
            let update = state.omega[b][i] / (displacement * displacement + state.xi);
            state.importance[b][i] = (state.importance[b][i] + update).max(T::zero());
            state.omega[b][i] = T::zero();
        }
        state.anchor[b].copy_from_slice(&theta_end[b]);
    }
    Ok(())
}

/// Quadratic penalty `c * sum importance * (theta - anchor)^2` and its
/// gradient `2c * importance * (theta - anchor)`.
pub fn si_penalty<T: Scalar>(theta: &[Vec<T>], state: &SiState<T>) -> Result<(T, Vec<Vec<T>>)> {
    state.check_shapes(theta, "theta")?;
    let two_c = state.c + state.c;
    let mut penalty = T::zero();
    let mut gradient = Vec::with_capacity(theta.len());
    for b in 0..theta.len() {
        let mut g_block = Vec::with_capacity(theta[b].len());
        for i in 0..theta[b].len() {
            let diff = theta[b][i] - state.anchor[b][i];
            penalty += state.c * state.importance[b][i] * diff * diff;
            g_block.push(two_c * state.importance[b][i] * diff);
        }
        gradient.push(g_block);
    }
    Ok((penalty, gradient))
}
