//! Dense multi-head networks.
//!
//! A network is a trunk of fully connected layers with rectifier activations
//! plus any number of task-private linear heads. Heads are keyed by string
//! identifiers (task notation like `"2/9"` in the experiment pipeline) and
//! stored in a `BTreeMap` so parameter iteration order is deterministic.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::adam::ParamBlock;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// A dense layer `y = act(W x + b)` with row-major `(out_dim, in_dim)` weights.
#[derive(Debug, Clone)]
pub struct DenseLayer<T> {
    pub weights: ParamBlock<T>,
    pub biases: ParamBlock<T>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    /// Glorot-uniform weights in `±sqrt(6/(fan_in+fan_out))`, zero biases.
    pub fn xavier<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| {
                let u: f64 = rng.random();
                T::of((2.0 * u - 1.0) * limit)
            })
            .collect();
        Self {
            weights: ParamBlock::from_values(weights),
            biases: ParamBlock::zeros(out_dim),
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: ParamBlock::zeros(in_dim * out_dim),
            biases: ParamBlock::zeros(out_dim),
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `act(W x + b)` for one input row.
    fn apply(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.in_dim);
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights.value[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases.value[o];
            for (w, x) in row.iter().zip(input) {
                acc = acc + *w * *x;
            }
            out.push(match self.activation {
                Activation::Relu => acc.max(T::zero()),
                Activation::Linear => acc,
            });
        }
        out
    }
}

/// Post-activation values retained by a forward pass, from the input batch
/// (index 0) through every trunk layer. Indexed `[layer][example][unit]`.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub activations: Vec<Vec<Vec<T>>>,
}

impl<T> ForwardTrace<T> {
    /// Activations of the last trunk layer (the head inputs).
    pub fn features(&self) -> &[Vec<T>] {
        self.activations.last().expect("trace holds the input batch")
    }
}

/// Shared trunk with per-task output heads.
#[derive(Debug, Clone)]
pub struct MultiHeadNet<T> {
    trunk: Vec<DenseLayer<T>>,
    heads: BTreeMap<String, DenseLayer<T>>,
    layer_sizes: Vec<usize>,
}

impl<T: Scalar> MultiHeadNet<T> {
    /// A trunk of rectifier layers `input_width -> hidden[0] -> ... -> hidden[last]`.
    pub fn new<R: Rng>(input_width: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if input_width == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config(
                "layer sizes must be positive and at least one hidden layer is required".into(),
            ));
        }
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut in_dim = input_width;
        for &width in hidden {
            trunk.push(DenseLayer::xavier(in_dim, width, Activation::Relu, rng));
            in_dim = width;
        }
        let mut layer_sizes = vec![input_width];
        layer_sizes.extend_from_slice(hidden);
        Ok(Self {
            trunk,
            heads: BTreeMap::new(),
            layer_sizes,
        })
    }

    pub fn from_trunk(trunk: Vec<DenseLayer<T>>) -> Self {
        let mut layer_sizes = vec![trunk[0].in_dim()];
        layer_sizes.extend(trunk.iter().map(|l| l.out_dim()));
        Self {
            trunk,
            heads: BTreeMap::new(),
            layer_sizes,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn feature_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn trunk(&self) -> &[DenseLayer<T>] {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.trunk
    }

    pub fn into_trunk(self) -> Vec<DenseLayer<T>> {
        self.trunk
    }

    pub fn head_ids(&self) -> impl Iterator<Item = &str> {
        self.heads.keys().map(String::as_str)
    }

    pub fn head(&self, id: &str) -> Result<&DenseLayer<T>> {
        self.heads.get(id).ok_or_else(|| Error::UnknownHead(id.into()))
    }

    pub fn head_mut(&mut self, id: &str) -> Result<&mut DenseLayer<T>> {
        self.heads.get_mut(id).ok_or_else(|| Error::UnknownHead(id.into()))
    }

    /// Adds a Glorot-initialized linear head. Replaces any head with the same id.
    pub fn add_head<R: Rng>(&mut self, id: &str, out_dim: usize, rng: &mut R) {
        let layer = DenseLayer::xavier(self.feature_width(), out_dim, Activation::Linear, rng);
        self.heads.insert(id.to_string(), layer);
    }

    pub fn insert_head(&mut self, id: &str, layer: DenseLayer<T>) -> Result<()> {
        if layer.in_dim() != self.feature_width() {
            return Err(Error::Shape(format!(
                "head '{id}' expects input width {}, trunk provides {}",
                layer.in_dim(),
                self.feature_width()
            )));
        }
        self.heads.insert(id.to_string(), layer);
        Ok(())
    }

    /// Forward pass through the trunk and the selected head.
    ///
    /// Returns one logit row per input row plus the trace of trunk
    /// activations needed for backpropagation or feature extraction.
    pub fn forward(&self, inputs: &[Vec<T>], head: &str) -> Result<(Vec<Vec<T>>, ForwardTrace<T>)> {
        let head_layer = self.head(head)?;
        let trace = self.forward_trunk(inputs)?;
        let logits = trace.features().iter().map(|f| head_layer.apply(f)).collect();
        Ok((logits, trace))
    }

    /// Trunk-only forward pass (for feature extraction).
    pub fn forward_trunk(&self, inputs: &[Vec<T>]) -> Result<ForwardTrace<T>> {
        for row in inputs {
            if row.len() != self.input_width() {
                return Err(Error::Shape(format!(
                    "input width {} does not match first trunk layer ({})",
                    row.len(),
                    self.input_width()
                )));
            }
        }
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        activations.push(inputs.to_vec());
        for layer in &self.trunk {
            let prev = activations.last().unwrap();
            let next: Vec<Vec<T>> = prev.iter().map(|row| layer.apply(row)).collect();
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    /// Clears gradients on the trunk and every head.
    pub fn zero_grads(&mut self) {
        for layer in &mut self.trunk {
            layer.weights.zero_grad();
            layer.biases.zero_grad();
        }
        for layer in self.heads.values_mut() {
            layer.weights.zero_grad();
            layer.biases.zero_grad();
        }
    }

    /// Clears Adam state on the trunk and every head.
    pub fn reset_optimizer(&mut self) {
        for layer in &mut self.trunk {
            layer.weights.reset_optimizer();
            layer.biases.reset_optimizer();
        }
        for layer in self.heads.values_mut() {
            layer.weights.reset_optimizer();
            layer.biases.reset_optimizer();
        }
    }

    /// Copies of the trunk parameter arrays, two blocks (weights, biases) per layer.
    pub fn trunk_values(&self) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(2 * self.trunk.len());
        for layer in &self.trunk {
            out.push(layer.weights.value.clone());
            out.push(layer.biases.value.clone());
        }
        out
    }

    /// Trunk gradients in the same block order as [`Self::trunk_values`].
    pub fn trunk_grads(&self) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(2 * self.trunk.len());
        for layer in &self.trunk {
            out.push(layer.weights.grad.clone());
            out.push(layer.biases.grad.clone());
        }
        out
    }

    /// All parameter blocks in deterministic order: trunk (weights, biases)
    /// per layer, then each head in key order.
    pub fn blocks(&self) -> Vec<&ParamBlock<T>> {
        self.trunk
            .iter()
            .flat_map(|l| [&l.weights, &l.biases])
            .chain(self.heads.values().flat_map(|l| [&l.weights, &l.biases]))
            .collect()
    }

    /// Mutable variant of [`Self::blocks`], same order.
    pub fn blocks_mut(&mut self) -> Vec<&mut ParamBlock<T>> {
        self.trunk
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
            .chain(
                self.heads
                    .values_mut()
                    .flat_map(|l| [&mut l.weights, &mut l.biases]),
            )
            .collect()
    }

    /// All parameter values are finite.
    pub fn is_finite(&self) -> bool {
        let block_ok = |b: &ParamBlock<T>| b.value.iter().all(|v| v.is_finite());
        self.trunk.iter().all(|l| block_ok(&l.weights) && block_ok(&l.biases))
            && self.heads.values().all(|l| block_ok(&l.weights) && block_ok(&l.biases))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_net_produces_zero_logits() {
        let mut net = MultiHeadNet::<f64>::new(3, &[4], &mut stream(0, 0)).unwrap();
        for layer in net.trunk_mut() {
            layer.weights.value.iter_mut().for_each(|w| *w = 0.0);
        }
        net.add_head("t", 2, &mut stream(0, 1));
        net.head_mut("t").unwrap().weights.value.iter_mut().for_each(|w| *w = 0.0);

        let (logits, _) = net.forward(&[vec![0.3, -1.0, 2.0]], "t").unwrap();
        assert_eq!(logits, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn identity_trunk_passes_nonnegative_input_to_head() {
        let mut net = MultiHeadNet::<f64>::new(2, &[2], &mut stream(0, 0)).unwrap();
        {
            let layer = &mut net.trunk_mut()[0];
            layer.weights.value.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            layer.biases.value.copy_from_slice(&[0.0, 0.0]);
        }
        net.add_head("t", 2, &mut stream(0, 1));
        let head = net.head("t").unwrap().clone();

        let x = vec![0.7, 1.3];
        let (logits, trace) = net.forward(&[x.clone()], "t").unwrap();
        assert_eq!(trace.features()[0], x);
        assert_eq!(logits[0], head.apply(&x));
    }

    #[test]
    fn forward_matches_naive_matrix_oracle() {
        let mut rng = stream(42, 0);
        let mut net = MultiHeadNet::<f64>::new(5, &[7, 4], &mut rng).unwrap();
        net.add_head("t", 2, &mut rng);

        let batch: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let (logits, _) = net.forward(&batch, "t").unwrap();

        // Straight-line re-implementation of the same arithmetic.
        let naive = |x: &[f64]| -> Vec<f64> {
            let mut cur = x.to_vec();
            for layer in net.trunk() {
                let (ins, outs) = (layer.in_dim(), layer.out_dim());
                let mut next = vec![0.0; outs];
                for o in 0..outs {
                    let mut acc = layer.biases.value[o];
                    for i in 0..ins {
                        acc += layer.weights.value[o * ins + i] * cur[i];
                    }
                    next[o] = acc.max(0.0);
                }
                cur = next;
            }
            let head = net.head("t").unwrap();
            (0..head.out_dim())
                .map(|o| {
                    let mut acc = head.biases.value[o];
                    for i in 0..head.in_dim() {
                        acc += head.weights.value[o * head.in_dim() + i] * cur[i];
                    }
                    acc
                })
                .collect()
        };

        for (row, x) in logits.iter().zip(&batch) {
            for (a, b) in row.iter().zip(naive(x)) {
                let rel = (a - b).abs() / b.abs().max(1e-300);
                assert!(rel < 1e-12, "forward mismatch: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unknown_head_and_bad_width_are_rejected() {
        let net = MultiHeadNet::<f64>::new(3, &[4], &mut stream(0, 0)).unwrap();
        assert!(matches!(net.forward(&[vec![0.0; 3]], "missing"), Err(Error::UnknownHead(_))));

        let mut net = net;
        net.add_head("t", 2, &mut stream(0, 1));
        assert!(matches!(net.forward(&[vec![0.0; 5]], "t"), Err(Error::Shape(_))));
    }

    #[test]
    fn initialization_is_deterministic_under_seed() {
        let a = MultiHeadNet::<f64>::new(8, &[16, 4], &mut stream(3, 0)).unwrap();
        let b = MultiHeadNet::<f64>::new(8, &[16, 4], &mut stream(3, 0)).unwrap();
        for (la, lb) in a.trunk().iter().zip(b.trunk()) {
            assert_eq!(la.weights.value, lb.weights.value);
            assert_eq!(la.biases.value, lb.biases.value);
        }
    }
}
