//! Sequence-level training: runs one continual-learning algorithm over a
//! task sequence and records the lower-triangular error matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::algos::coreset::{select_coreset, Coreset};
use crate::algos::si::{si_consolidate, si_path_update, si_penalty, SiState};
use crate::algos::vcl::{elbo_multi_group, elbo_objective, predict_probs, GroupBatch, PosteriorNet};
use crate::data::{TaskData, TaskSequence, UnitTask};
use crate::error::{Error, Result};
use crate::nn::{adam_step, batch_probs, loss_and_backprop, MultiHeadNet, OptimizerConfig};
use crate::rng;
use crate::scalar::Scalar;

/// The continual-learning algorithms under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Si,
    Vcl,
    CoresetVcl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Si, Algorithm::Vcl, Algorithm::CoresetVcl];

    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Si => "si",
            Algorithm::Vcl => "vcl",
            Algorithm::CoresetVcl => "coreset-vcl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "si" => Ok(Algorithm::Si),
            "vcl" => Ok(Algorithm::Vcl),
            "coreset-vcl" => Ok(Algorithm::CoresetVcl),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected si, vcl, or coreset-vcl)"
            ))),
        }
    }
}

/// Everything a sequence run needs to know about architecture and training.
#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub input_width: usize,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerConfig<T>,
    /// Epochs per task and minibatch size for SI.
    pub si_epochs: usize,
    pub si_batch: usize,
    /// SI regularization strength (lambda) and damping.
    pub lambda: T,
    pub xi: T,
    /// Epochs per task for VCL; each epoch is one full-batch step.
    pub vcl_epochs: usize,
    /// Monte-Carlo weight samples during training and evaluation.
    pub mc_train: usize,
    pub mc_eval: usize,
    /// Examples withheld per task for coreset VCL.
    pub coreset_size: usize,
    /// Initial posterior standard deviation for VCL.
    pub sigma_init: T,
    /// Plain minibatch epochs of maximum-likelihood training that seed the
    /// first task's posterior means (0 keeps cold random means).
    pub vcl_ml_epochs: usize,
    pub vcl_ml_batch: usize,
}

impl<T: Scalar> RunConfig<T> {
    pub fn with_defaults(input_width: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_width,
            hidden,
            optimizer: OptimizerConfig::default(),
            si_epochs: 5,
            si_batch: 64,
            lambda: T::one(),
            xi: T::of(0.1),
            vcl_epochs: 20,
            mc_train: 10,
            mc_eval: 100,
            coreset_size: 20,
            sigma_init: T::of(1e-3),
            vcl_ml_epochs: 30,
            vcl_ml_batch: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.input_width == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("architecture sizes must be positive".into()));
        }
        if self.si_epochs == 0 || self.si_batch == 0 || self.vcl_epochs == 0 {
            return Err(Error::Config("epochs and batch sizes must be positive".into()));
        }
        if self.mc_train == 0 || self.mc_eval == 0 {
            return Err(Error::Config("Monte-Carlo sample counts must be positive".into()));
        }
        if !(self.xi > T::zero()) {
            return Err(Error::Config("xi must be positive".into()));
        }
        if !(self.sigma_init > T::zero()) {
            return Err(Error::Config("sigma_init must be positive".into()));
        }
        if self.lambda < T::zero() {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// RNG stream layout of a sequence run. Streams are derived from the run
/// seed, so evaluation draws never shift training draws and vice versa.
pub mod streams {
    /// Network or posterior initialization.
    pub const INIT: u64 = 0;

    const STRIDE: u64 = 8;
    const TASK_BASE: u64 = 16;

    pub const HEAD_INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const MC_TRAIN: u64 = 2;
    pub const CORESET: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const FINETUNE: u64 = 5;
    pub const ML_INIT: u64 = 6;

    /// Stream id for a purpose within task `i` (0-based).
    pub fn task(i: usize, purpose: u64) -> u64 {
        TASK_BASE + i as u64 * STRIDE + purpose
    }
}

/// Lower-triangular error record of one run: `errors[i][j]` is the test
/// error on task `j` after finishing training task `i` (for `j <= i`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub sequence: TaskSequence,
    pub errors: Vec<Vec<f64>>,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl RunRecord {
    pub fn new(
        sequence: TaskSequence,
        errors: Vec<Vec<f64>>,
        algorithm: Algorithm,
        seed: u64,
    ) -> Result<Self> {
        if errors.len() != sequence.len() {
            return Err(Error::Data(format!(
                "record has {} rows for a length-{} sequence",
                errors.len(),
                sequence.len()
            )));
        }
        for (i, row) in errors.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Data(format!(
                    "row {i} should have {} entries, has {}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|e| !(0.0..=1.0).contains(e)) {
                return Err(Error::Data(format!("row {i} has an error outside [0, 1]")));
            }
        }
        Ok(Self {
            sequence,
            errors,
            algorithm,
            seed,
        })
    }
}

/// The hardness measure: the average test error over all tasks after the
/// last task has been trained (the mean of the record's final row).
pub fn final_hardness(record: &RunRecord) -> Result<f64> {
    let k = record.sequence.len();
    let last = record
        .errors
        .last()
        .filter(|row| row.len() == k && record.errors.len() == k)
        .ok_or_else(|| Error::Data("incomplete run record".into()))?;
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

fn gather<T: Clone>(rows: &[Vec<T>], labels: &[usize], idx: &[usize]) -> (Vec<Vec<T>>, Vec<usize>) {
    (
        idx.iter().map(|&i| rows[i].clone()).collect(),
        idx.iter().map(|&i| labels[i]).collect(),
    )
}

fn error_rate<T: Scalar>(probs: &[Vec<T>], labels: &[usize]) -> f64 {
    let wrong = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| usize::from(p[1] > p[0]) != y)
        .count();
    wrong as f64 / labels.len() as f64
}

/// Trains the algorithm on the sequence's tasks in order (fresh head per
/// task, shared trunk) and evaluates the test error on every seen task
/// after each task boundary.
pub fn run_sequence<T: Scalar>(
    algorithm: Algorithm,
    sequence: &TaskSequence,
    tasks: &BTreeMap<UnitTask, TaskData<T>>,
    config: &RunConfig<T>,
    seed: u64,
) -> Result<RunRecord> {
    config.validate()?;
    for t in sequence.tasks() {
        let data = tasks
            .get(t)
            .ok_or_else(|| Error::Data(format!("task {t} is not materialized")))?;
        if data.train.input_width() != config.input_width {
            return Err(Error::Shape(format!(
                "task {t} has input width {}, config says {}",
                data.train.input_width(),
                config.input_width
            )));
        }
    }

    let errors = match algorithm {
        Algorithm::Si => run_si(sequence, tasks, config, seed)?,
        Algorithm::Vcl => run_vcl(sequence, tasks, config, seed, false)?,
        Algorithm::CoresetVcl => run_vcl(sequence, tasks, config, seed, true)?,
    };
    RunRecord::new(sequence.clone(), errors, algorithm, seed)
}

fn run_si<T: Scalar>(
    sequence: &TaskSequence,
    tasks: &BTreeMap<UnitTask, TaskData<T>>,
    config: &RunConfig<T>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut net = MultiHeadNet::new(
        config.input_width,
        &config.hidden,
        &mut rng::stream(seed, streams::INIT),
    )?;
    let mut si = SiState::new(net.trunk_values(), config.xi, config.lambda)?;
    let mut errors = Vec::with_capacity(sequence.len());

    for (i, &task) in sequence.tasks().iter().enumerate() {
        let data = &tasks[&task];
        let head = task.notation();
        net.add_head(&head, 2, &mut rng::stream(seed, streams::task(i, streams::HEAD_INIT)));
        net.reset_optimizer();

        let mut order: Vec<usize> = (0..data.train.len()).collect();
        let mut shuffle_rng = rng::stream(seed, streams::task(i, streams::SHUFFLE));
        for _ in 0..config.si_epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(config.si_batch) {
                let (inputs, labels) = gather(&data.train.inputs, &data.train.labels, chunk);
                let loss = loss_and_backprop(&mut net, &inputs, &labels, &head)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence("SI training loss is non-finite".into()));
                }
                // Quadratic pull toward the consolidated anchor.
                let theta_before = net.trunk_values();
                let (_, penalty_grad) = si_penalty(&theta_before, &si)?;
                for (layer_idx, layer) in net.trunk_mut().iter_mut().enumerate() {
                    for (g, p) in layer.weights.grad.iter_mut().zip(&penalty_grad[2 * layer_idx]) {
                        *g += *p;
                    }
                    for (g, p) in layer.biases.grad.iter_mut().zip(&penalty_grad[2 * layer_idx + 1]) {
                        *g += *p;
                    }
                }
                let descent_grads = net.trunk_grads();

                for layer in net.trunk_mut() {
                    adam_step(&mut layer.weights, &config.optimizer)?;
                    adam_step(&mut layer.biases, &config.optimizer)?;
                }
                {
                    let head_layer = net.head_mut(&head)?;
                    adam_step(&mut head_layer.weights, &config.optimizer)?;
                    adam_step(&mut head_layer.biases, &config.optimizer)?;
                }

                let theta_after = net.trunk_values();
                let delta: Vec<Vec<T>> = theta_after
                    .iter()
                    .zip(&theta_before)
                    .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y).collect())
                    .collect();
                si_path_update(&mut si, &descent_grads, &delta)?;
            }
        }
        si_consolidate(&mut si, &net.trunk_values())?;

        let mut row = Vec::with_capacity(i + 1);
        for &seen in &sequence.tasks()[..=i] {
            let seen_data = &tasks[&seen];
            let probs = batch_probs(&net, &seen_data.test.inputs, &seen.notation())?;
            row.push(error_rate(&probs, &seen_data.test.labels));
        }
        errors.push(row);
    }
    Ok(errors)
}

/// Maximum-likelihood warm start: plain minibatch training of a fresh net
/// on the first task's data, whose parameters become the initial posterior
/// means.
fn ml_warm_start<T: Scalar>(
    head: &str,
    inputs: &[Vec<T>],
    labels: &[usize],
    config: &RunConfig<T>,
    seed: u64,
) -> Result<MultiHeadNet<T>> {
    let mut net = MultiHeadNet::new(
        config.input_width,
        &config.hidden,
        &mut rng::stream(seed, streams::INIT),
    )?;
    net.add_head(head, 2, &mut rng::stream(seed, streams::task(0, streams::HEAD_INIT)));
    if inputs.is_empty() {
        return Ok(net);
    }
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffle_rng = rng::stream(seed, streams::task(0, streams::ML_INIT));
    for _ in 0..config.vcl_ml_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.vcl_ml_batch.max(1)) {
            let (batch_inputs, batch_labels) = gather(inputs, labels, chunk);
            let loss = loss_and_backprop(&mut net, &batch_inputs, &batch_labels, head)?;
            if !loss.is_finite() {
                return Err(Error::Divergence("ML warm start diverged".into()));
            }
            for block in net.blocks_mut() {
                adam_step(block, &config.optimizer)?;
            }
        }
    }
    Ok(net)
}

fn run_vcl<T: Scalar>(
    sequence: &TaskSequence,
    tasks: &BTreeMap<UnitTask, TaskData<T>>,
    config: &RunConfig<T>,
    seed: u64,
    with_coreset: bool,
) -> Result<Vec<Vec<f64>>> {
    let mut post: Option<PosteriorNet<T>> = None;
    let mut coresets = Coreset::<T>::new(config.coreset_size);
    let mut errors = Vec::with_capacity(sequence.len());

    for (i, &task) in sequence.tasks().iter().enumerate() {
        let data = &tasks[&task];
        let head = task.notation();

        // Coreset VCL withholds stored examples from training.
        let (train_inputs, train_labels) = if with_coreset && config.coreset_size > 0 {
            let split = select_coreset(
                data,
                config.coreset_size.min(data.train.len()),
                rng::derive(seed, streams::task(i, streams::CORESET)),
            )?;
            coresets.insert(&head, split.selected_inputs, split.selected_labels)?;
            (split.remainder_inputs, split.remainder_labels)
        } else {
            (data.train.inputs.clone(), data.train.labels.clone())
        };

        let post = match post.as_mut() {
            None => {
                // First task: posterior means start from a maximum-likelihood
                // fit (or от cold random means when disabled).
                let initial = if config.vcl_ml_epochs > 0 {
                    let net = ml_warm_start(&head, &train_inputs, &train_labels, config, seed)?;
                    PosteriorNet::from_net(&net, config.sigma_init)?
                } else {
                    let mut cold = PosteriorNet::new(
                        config.input_width,
                        &config.hidden,
                        config.sigma_init,
                        &mut rng::stream(seed, streams::INIT),
                    )?;
                    cold.add_head(
                        &head,
                        2,
                        config.sigma_init,
                        &mut rng::stream(seed, streams::task(0, streams::HEAD_INIT)),
                    );
                    cold
                };
                post = Some(initial);
                post.as_mut().unwrap()
            }
            Some(existing) => {
                existing.advance_trunk_prior();
                existing.add_head(
                    &head,
                    2,
                    config.sigma_init,
                    &mut rng::stream(seed, streams::task(i, streams::HEAD_INIT)),
                );
                existing
            }
        };
        post.reset_optimizer(&[head.as_str()])?;

        // Full-batch training: one step per epoch, batch = training set.
        let mut mc_rng = rng::stream(seed, streams::task(i, streams::MC_TRAIN));
        for _ in 0..config.vcl_epochs {
            let objective = elbo_objective(
                &mut post,
                &head,
                &train_inputs,
                &train_labels,
                config.mc_train,
                train_inputs.len(),
                &mut mc_rng,
            )?;
            if !objective.is_finite() {
                return Err(Error::Divergence("VCL objective is non-finite".into()));
            }
            post.adam_step(&[head.as_str()], &config.optimizer)?;
        }

        // Coreset VCL predicts from a clone fine-tuned on all stored
        // coresets, with the propagated posterior as its prior.
        let eval_post = if with_coreset && !coresets.is_empty() {
            let mut tuned = post.clone();
            tuned.advance_all_priors();
            let head_ids: Vec<String> = coresets.per_task.keys().cloned().collect();
            let id_refs: Vec<&str> = head_ids.iter().map(String::as_str).collect();
            tuned.reset_optimizer(&id_refs)?;
            let mut ft_rng = rng::stream(seed, streams::task(i, streams::FINETUNE));
            for _ in 0..config.vcl_epochs {
                let groups: Vec<GroupBatch<'_, T>> = coresets
                    .per_task
                    .iter()
                    .map(|(h, (inputs, labels))| GroupBatch {
                        head: h.as_str(),
                        inputs,
                        labels,
                    })
                    .collect();
                let objective = elbo_multi_group(&mut tuned, &groups, config.mc_train, &mut ft_rng)?;
                if !objective.is_finite() {
                    return Err(Error::Divergence("coreset fine-tuning diverged".into()));
                }
                tuned.adam_step(&id_refs, &config.optimizer)?;
            }
            tuned
        } else {
            post.clone()
        };

        // Predictions average predictive probabilities over weight draws.
        let mut eval_rng = rng::stream(seed, streams::task(i, streams::EVAL));
        let mut row = Vec::with_capacity(i + 1);
        for &seen in &sequence.tasks()[..=i] {
            let seen_data = &tasks[&seen];
            let probs = predict_probs(
                &eval_post,
                &seen.notation(),
                &seen_data.test.inputs,
                config.mc_eval,
                &mut eval_rng,
            )?;
            row.push(error_rate(&probs, &seen_data.test.labels));
        }
        errors.push(row);
    }
    Ok(errors)
}
