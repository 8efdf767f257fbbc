//! The probe network: a dense feature extractor trained once on the pooled
//! multi-class dataset, then frozen. Task embeddings are diagonal Fisher
//! information of its trunk parameters.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_backprop, DenseLayer, MultiHeadNet, OptimizerConfig};
use crate::rng;
use crate::scalar::Scalar;

/// Probe training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Hidden widths of the trunk.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            epochs: 30,
            batch: 128,
            learning_rate: 0.001,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("probe hidden widths must be positive".into()));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("probe epochs and batch must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("probe learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Training provenance kept with a probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub seed: u64,
    pub epochs: usize,
    pub train_error: f64,
}

/// A frozen feature extractor with `unit_count` total hidden units.
#[derive(Debug, Clone)]
pub struct ProbeNetwork<T> {
    trunk: Vec<DenseLayer<T>>,
    pub unit_count: usize,
    pub id: String,
    pub meta: ProbeMeta,
}

impl<T: Scalar> ProbeNetwork<T> {
    pub fn from_parts(trunk: Vec<DenseLayer<T>>, id: String, meta: ProbeMeta) -> Self {
        let unit_count = trunk.iter().map(|l| l.out_dim()).sum();
        Self {
            trunk,
            unit_count,
            id,
            meta,
        }
    }

    pub fn trunk(&self) -> &[DenseLayer<T>] {
        &self.trunk
    }

    pub fn input_width(&self) -> usize {
        self.trunk[0].in_dim()
    }

    pub fn feature_width(&self) -> usize {
        self.trunk.last().unwrap().out_dim()
    }

    /// Last-hidden-layer activations for a batch.
    pub fn features(&self, inputs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let net = MultiHeadNet::from_trunk(self.trunk.clone());
        let trace = net.forward_trunk(inputs)?;
        Ok(trace.features().to_vec())
    }

    /// A trainable network sharing this probe's (cloned) trunk, with the
    /// given head attached under the given id.
    pub fn with_head(&self, id: &str, head: DenseLayer<T>) -> Result<MultiHeadNet<T>> {
        let mut net = MultiHeadNet::from_trunk(self.trunk.clone());
        net.insert_head(id, head)?;
        Ok(net)
    }
}

fn probe_id(config: &ProbeConfig, seed: u64, input_width: usize, classes: usize) -> String {
    let widths: Vec<String> = config.hidden.iter().map(|w| w.to_string()).collect();
    format!(
        "h{}-e{}-b{}-s{}-in{}-c{}",
        widths.join("x"),
        config.epochs,
        config.batch,
        seed,
        input_width,
        classes
    )
}

/// Trains a trunk plus an L-way softmax head on the pooled dataset, then
/// discards the head and freezes the trunk.
pub fn train_probe<T: Scalar>(
    pooled: &LabeledDataset<T>,
    config: &ProbeConfig,
    seed: u64,
) -> Result<ProbeNetwork<T>> {
    config.validate()?;
    let classes = pooled.label_count;
    if classes < 2 {
        return Err(Error::Data("probe training needs at least two classes".into()));
    }
    for c in 0..classes {
        if pooled.count_label(c) == 0 {
            return Err(Error::Data(format!("pooled dataset is missing class {c}")));
        }
    }

    let mut net = MultiHeadNet::new(pooled.input_width(), &config.hidden, &mut rng::stream(seed, 0))?;
    net.add_head("pooled", classes, &mut rng::stream(seed, 1));

    let optimizer = OptimizerConfig::with_learning_rate(T::of(config.learning_rate));
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    let mut shuffle_rng = rng::stream(seed, 2);
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch) {
            let inputs: Vec<Vec<T>> = chunk.iter().map(|&i| pooled.inputs[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| pooled.labels[i]).collect();
            let loss = loss_and_backprop(&mut net, &inputs, &labels, "pooled")?;
            if !loss.is_finite() {
                return Err(Error::Divergence("probe training loss is non-finite".into()));
            }
            for block in net.blocks_mut() {
                adam_step(block, &optimizer)?;
            }
        }
    }

    let probs = crate::nn::batch_probs(&net, &pooled.inputs, "pooled")?;
    let wrong = probs
        .iter()
        .zip(&pooled.labels)
        .filter(|(p, &y)| {
            let pred = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            pred != y
        })
        .count();
    let train_error = wrong as f64 / pooled.len() as f64;

    let id = probe_id(config, seed, pooled.input_width(), classes);
    let meta = ProbeMeta {
        seed,
        epochs: config.epochs,
        train_error,
    };
    Ok(ProbeNetwork::from_parts(net.into_trunk(), id, meta))
}
