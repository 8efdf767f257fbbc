//! Task embedding construction: train a binary head on frozen probe
//! features, then summarize the trunk's diagonal Fisher information per
//! hidden unit.

use serde::{Deserialize, Serialize};

use crate::data::TaskData;
use crate::embed::distance::{TaskEmbedding, TaskKey};
use crate::embed::probe::ProbeNetwork;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_backprop, softmax, Activation, DenseLayer, OptimizerConfig};
use crate::scalar::Scalar;

/// Settings for the per-task head fit that precedes Fisher estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    /// Full-batch Adam iterations for the binary head.
    pub head_steps: usize,
    pub head_learning_rate: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            head_steps: 400,
            head_learning_rate: 0.05,
        }
    }
}

/// Trains a binary softmax head on fixed features.
///
/// The head starts from zero weights: the problem is convex, and a zero
/// start makes the fit deterministic and exactly symmetric under label
/// exchange.
fn fit_binary_head<T: Scalar>(
    features: &[Vec<T>],
    labels: &[usize],
    config: &EmbedConfig,
) -> Result<DenseLayer<T>> {
    let dim = features[0].len();
    let n = features.len();
    let scale = T::of(1.0 / n as f64);
    let mut head = DenseLayer::zeros(dim, 2, Activation::Linear);
    let optimizer = OptimizerConfig::with_learning_rate(T::of(config.head_learning_rate));

    for _ in 0..config.head_steps {
        head.weights.zero_grad();
        head.biases.zero_grad();
        let mut loss = T::zero();
        for (f, &y) in features.iter().zip(labels) {
            let mut logits = [T::zero(), T::zero()];
            for o in 0..2 {
                let row = &head.weights.value[o * dim..(o + 1) * dim];
                let mut acc = head.biases.value[o];
                for (w, x) in row.iter().zip(f) {
                    acc = acc + *w * *x;
                }
                logits[o] = acc;
            }
            let p = softmax(&logits);
            loss -= p[y].max(T::of(1e-300)).ln() * scale;
            for o in 0..2 {
                let mut d = p[o] * scale;
                if o == y {
                    d -= scale;
                }
                head.biases.grad[o] += d;
                for (i, x) in f.iter().enumerate() {
                    head.weights.grad[o * dim + i] += d * *x;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::Divergence("embedding head training diverged".into()));
        }
        adam_step(&mut head.weights, &optimizer)?;
        adam_step(&mut head.biases, &optimizer)?;
    }
    Ok(head)
}

/// Shared pipeline: fit a head, accumulate the exact two-class diagonal
/// Fisher of the trunk, then average per hidden unit.
fn embed_pipeline<T: Scalar>(
    probe: &ProbeNetwork<T>,
    inputs: &[Vec<T>],
    labels: &[usize],
    key: TaskKey,
    config: &EmbedConfig,
) -> Result<TaskEmbedding<T>> {
    if inputs.is_empty() {
        return Err(Error::Data("cannot embed an empty task".into()));
    }
    let features = probe.features(inputs)?;
    let head = fit_binary_head(&features, labels, config)?;
    let mut net = probe.with_head("embed", head)?;

    // F_j = (1/N) sum_i sum_y p(y|x_i) (d log p(y|x_i) / d theta_j)^2 over
    // trunk parameters, with p the trained model's predictive distribution.
    let trunk_blocks = 2 * probe.trunk().len();
    let mut fisher: Vec<Vec<T>> = net.blocks()[..trunk_blocks]
        .iter()
        .map(|b| vec![T::zero(); b.len()])
        .collect();

    for input in inputs {
        let single = std::slice::from_ref(input);
        let (logits, _) = net.forward(single, "embed")?;
        let probs = softmax(&logits[0]);
        for y in 0..2 {
            // Batch of one: grad of the mean CE is -grad of log p(y|x).
            loss_and_backprop(&mut net, single, &[y], "embed")?;
            let blocks = net.blocks();
            for (f_block, g_block) in fisher.iter_mut().zip(&blocks[..trunk_blocks]) {
                for (f, &g) in f_block.iter_mut().zip(&g_block.grad) {
                    *f += probs[y] * g * g;
                }
            }
        }
    }
    let inv_n = T::of(1.0 / inputs.len() as f64);
    for block in &mut fisher {
        for f in block.iter_mut() {
            *f *= inv_n;
        }
    }

    // Average over all parameters feeding each hidden unit (its incoming
    // weight row plus its bias), one value per unit across all trunk layers.
    let mut values = Vec::with_capacity(probe.unit_count);
    for (layer_idx, layer) in probe.trunk().iter().enumerate() {
        let w = &fisher[2 * layer_idx];
        let b = &fisher[2 * layer_idx + 1];
        let in_dim = layer.in_dim();
        for o in 0..layer.out_dim() {
            let mut acc = b[o];
            for i in 0..in_dim {
                acc += w[o * in_dim + i];
            }
            values.push(acc / T::of((in_dim + 1) as f64));
        }
    }
    debug_assert_eq!(values.len(), probe.unit_count);

    Ok(TaskEmbedding {
        values,
        task: key,
        probe_id: probe.id.clone(),
    })
}

/// Embeds a materialized unit task.
///
/// The pipeline is deterministic: the head starts from zeros and trains
/// full-batch, and the Fisher expectation is exact over the two classes.
/// The seed is recorded in cache manifests for provenance.
pub fn embed_task<T: Scalar>(
    probe: &ProbeNetwork<T>,
    task: &TaskData<T>,
    config: &EmbedConfig,
    _seed: u64,
) -> Result<TaskEmbedding<T>> {
    embed_pipeline(
        probe,
        &task.train.inputs,
        &task.train.labels,
        TaskKey::Task(task.origin),
        config,
    )
}

/// Embeds the trivial task: the pooled inputs under one constant label,
/// pushed through the identical pipeline.
pub fn trivial_embedding<T: Scalar>(
    probe: &ProbeNetwork<T>,
    pooled_inputs: &[Vec<T>],
    config: &EmbedConfig,
    _seed: u64,
) -> Result<TaskEmbedding<T>> {
    let labels = vec![0usize; pooled_inputs.len()];
    embed_pipeline(probe, pooled_inputs, &labels, TaskKey::Trivial, config)
}
