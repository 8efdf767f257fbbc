//! Variational continual learning: mean-field Gaussian posteriors over the
//! network parameters, the ELBO objective with reparameterized gradients,
//! and Monte-Carlo predictive probabilities.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{loss_and_backprop, softmax, Activation, DenseLayer, MultiHeadNet, ParamBlock};
use crate::scalar::Scalar;

/// Mean-field Gaussian over one parameter block, with its prior.
///
/// `mean.value` holds mu and `log_std.value` holds log sigma; both carry
/// gradient and Adam state through their [`ParamBlock`]s.
#[derive(Debug, Clone)]
pub struct GaussianPosterior<T> {
    pub mean: ParamBlock<T>,
    pub log_std: ParamBlock<T>,
    pub prior_mean: Vec<T>,
    pub prior_log_std: Vec<T>,
}

impl<T: Scalar> GaussianPosterior<T> {
    /// Posterior with the given mean values and a uniform initial log sigma,
    /// under a standard normal prior.
    pub fn new(mean: Vec<T>, log_std_init: T) -> Self {
        let len = mean.len();
        Self {
            mean: ParamBlock::from_values(mean),
            log_std: ParamBlock::from_values(vec![log_std_init; len]),
            prior_mean: vec![T::zero(); len],
            prior_log_std: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Makes the current posterior the prior (the continual-learning update
    /// between tasks).
    pub fn advance_prior(&mut self) {
        self.prior_mean.copy_from_slice(&self.mean.value);
        self.prior_log_std.copy_from_slice(&self.log_std.value);
    }
}

/// KL(q || prior) for a diagonal Gaussian block:
/// `0.5 sum(log(sp^2/sq^2) + (sq^2 + (mq - mp)^2)/sp^2 - 1)`.
pub fn kl_diag_gaussian<T: Scalar>(q: &GaussianPosterior<T>) -> Result<T> {
    let mut total = T::zero();
    for i in 0..q.len() {
        let (mq, lsq) = (q.mean.value[i], q.log_std.value[i]);
        let (mp, lsp) = (q.prior_mean[i], q.prior_log_std[i]);
        if !(mq.is_finite() && lsq.is_finite() && mp.is_finite() && lsp.is_finite()) {
            return Err(Error::Divergence("non-finite posterior parameters".into()));
        }
        let var_ratio = ((lsq - lsp) + (lsq - lsp)).exp();
        let mean_term = {
            let d = (mq - mp) / lsp.exp();
            d * d
        };
        total += T::of(0.5) * ((lsp - lsq) + (lsp - lsq) + var_ratio + mean_term - T::one());
    }
    Ok(total.max(T::zero()))
}

/// Accumulates d KL / d mu and d KL / d log sigma into the block's grads.
fn kl_grad_accumulate<T: Scalar>(q: &mut GaussianPosterior<T>) {
    for i in 0..q.mean.value.len() {
        let var_p = (q.prior_log_std[i] + q.prior_log_std[i]).exp();
        q.mean.grad[i] += (q.mean.value[i] - q.prior_mean[i]) / var_p;
        let var_q = (q.log_std.value[i] + q.log_std.value[i]).exp();
        q.log_std.grad[i] += var_q / var_p - T::one();
    }
}

/// Mean-field posterior over a whole multi-head network: one pair of blocks
/// (weights, biases) per trunk layer, plus a pair per head.
#[derive(Debug, Clone)]
pub struct PosteriorNet<T> {
    input_width: usize,
    hidden: Vec<usize>,
    pub trunk: Vec<GaussianPosterior<T>>,
    pub heads: BTreeMap<String, Vec<GaussianPosterior<T>>>,
}

impl<T: Scalar> PosteriorNet<T> {
    /// Means follow the same Glorot initialization as a plain network drawn
    /// from the same RNG; log sigma starts at `log(sigma_init)`; the first
    /// prior is standard normal.
    pub fn new<R: Rng>(
        input_width: usize,
        hidden: &[usize],
        sigma_init: T,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma_init > T::zero()) {
            return Err(Error::Config("sigma_init must be positive".into()));
        }
        let template = MultiHeadNet::<T>::new(input_width, hidden, rng)?;
        let log_std_init = sigma_init.ln();
        let trunk = template
            .trunk()
            .iter()
            .flat_map(|l| [l.weights.value.clone(), l.biases.value.clone()])
            .map(|mean| GaussianPosterior::new(mean, log_std_init))
            .collect();
        Ok(Self {
            input_width,
            hidden: hidden.to_vec(),
            trunk,
            heads: BTreeMap::new(),
        })
    }

    /// Adopts a trained network's parameters as the posterior means (the
    /// maximum-likelihood warm start for the first task). Heads present on
    /// the network become head posteriors.
    pub fn from_net(net: &MultiHeadNet<T>, sigma_init: T) -> Result<Self> {
        if !(sigma_init > T::zero()) {
            return Err(Error::Config("sigma_init must be positive".into()));
        }
        let log_std_init = sigma_init.ln();
        let trunk = net
            .trunk()
            .iter()
            .flat_map(|l| [l.weights.value.clone(), l.biases.value.clone()])
            .map(|mean| GaussianPosterior::new(mean, log_std_init))
            .collect();
        let mut posterior = Self {
            input_width: net.input_width(),
            hidden: net.layer_sizes()[1..].to_vec(),
            trunk,
            heads: BTreeMap::new(),
        };
        for id in net.head_ids() {
            let layer = net.head(id)?;
            posterior.heads.insert(
                id.to_string(),
                vec![
                    GaussianPosterior::new(layer.weights.value.clone(), log_std_init),
                    GaussianPosterior::new(layer.biases.value.clone(), log_std_init),
                ],
            );
        }
        Ok(posterior)
    }

    pub fn add_head<R: Rng>(&mut self, id: &str, out_dim: usize, sigma_init: T, rng: &mut R) {
        let feature_width = *self.hidden.last().unwrap();
        let template = DenseLayer::<T>::xavier(feature_width, out_dim, Activation::Linear, rng);
        let log_std_init = sigma_init.ln();
        self.heads.insert(
            id.to_string(),
            vec![
                GaussianPosterior::new(template.weights.value, log_std_init),
                GaussianPosterior::new(template.biases.value, log_std_init),
            ],
        );
    }

    pub fn head_out_dim(&self, id: &str) -> Result<usize> {
        let blocks = self.heads.get(id).ok_or_else(|| Error::UnknownHead(id.into()))?;
        Ok(blocks[1].len())
    }

    /// Trunk blocks followed by the selected heads' blocks, mutably.
    fn active_blocks_mut(&mut self, head_ids: &[&str]) -> Result<Vec<&mut GaussianPosterior<T>>> {
        for id in head_ids {
            if !self.heads.contains_key(*id) {
                return Err(Error::UnknownHead((*id).into()));
            }
        }
        let mut blocks: Vec<&mut GaussianPosterior<T>> = self.trunk.iter_mut().collect();
        for (id, head_blocks) in self.heads.iter_mut() {
            if head_ids.contains(&id.as_str()) {
                blocks.extend(head_blocks.iter_mut());
            }
        }
        Ok(blocks)
    }

    fn active_blocks(&self, head_ids: &[&str]) -> Result<Vec<&GaussianPosterior<T>>> {
        for id in head_ids {
            if !self.heads.contains_key(*id) {
                return Err(Error::UnknownHead((*id).into()));
            }
        }
        let mut blocks: Vec<&GaussianPosterior<T>> = self.trunk.iter().collect();
        for (id, head_blocks) in self.heads.iter() {
            if head_ids.contains(&id.as_str()) {
                blocks.extend(head_blocks.iter());
            }
        }
        Ok(blocks)
    }

    /// Standard-normal noise shaped like the active blocks.
    fn draw_noise<R: Rng>(&self, head_ids: &[&str], rng: &mut R) -> Result<Vec<Vec<T>>> {
        Ok(self
            .active_blocks(head_ids)?
            .iter()
            .map(|b| {
                (0..b.len())
                    .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
                    .collect()
            })
            .collect())
    }

    /// Deterministic network holding `w = mu + sigma * eps` for the trunk
    /// and the selected head.
    fn sample_net(&self, head: &str, noise: &[Vec<T>]) -> Result<MultiHeadNet<T>> {
        let realize = |block: &GaussianPosterior<T>, eps: &[T]| -> Vec<T> {
            block
                .mean
                .value
                .iter()
                .zip(block.log_std.value.iter())
                .zip(eps)
                .map(|((&m, &ls), &e)| m + ls.exp() * e)
                .collect()
        };

        let mut trunk_layers = Vec::with_capacity(self.hidden.len());
        let mut in_dim = self.input_width;
        for (l, &width) in self.hidden.iter().enumerate() {
            let mut layer = DenseLayer::zeros(in_dim, width, Activation::Relu);
            layer.weights.value = realize(&self.trunk[2 * l], &noise[2 * l]);
            layer.biases.value = realize(&self.trunk[2 * l + 1], &noise[2 * l + 1]);
            trunk_layers.push(layer);
            in_dim = width;
        }
        let mut net = MultiHeadNet::from_trunk(trunk_layers);

        let head_blocks = self.heads.get(head).ok_or_else(|| Error::UnknownHead(head.into()))?;
        let out_dim = head_blocks[1].len();
        let base = 2 * self.hidden.len();
        let mut layer = DenseLayer::zeros(in_dim, out_dim, Activation::Linear);
        layer.weights.value = realize(&head_blocks[0], &noise[base]);
        layer.biases.value = realize(&head_blocks[1], &noise[base + 1]);
        net.insert_head(head, layer)?;
        Ok(net)
    }

    pub fn zero_grads(&mut self, head_ids: &[&str]) -> Result<()> {
        for block in self.active_blocks_mut(head_ids)? {
            block.mean.zero_grad();
            block.log_std.zero_grad();
        }
        Ok(())
    }

    pub fn reset_optimizer(&mut self, head_ids: &[&str]) -> Result<()> {
        for block in self.active_blocks_mut(head_ids)? {
            block.mean.reset_optimizer();
            block.log_std.reset_optimizer();
        }
        Ok(())
    }

    /// One Adam step on means and log sigmas of the active blocks.
    pub fn adam_step(
        &mut self,
        head_ids: &[&str],
        config: &crate::nn::OptimizerConfig<T>,
    ) -> Result<()> {
        for block in self.active_blocks_mut(head_ids)? {
            crate::nn::adam_step(&mut block.mean, config)?;
            crate::nn::adam_step(&mut block.log_std, config)?;
        }
        Ok(())
    }

    /// Sets the trunk prior to the current trunk posterior.
    pub fn advance_trunk_prior(&mut self) {
        for block in &mut self.trunk {
            block.advance_prior();
        }
    }

    /// Sets every prior (trunk and heads) to the current posterior.
    pub fn advance_all_priors(&mut self) {
        for block in &mut self.trunk {
            block.advance_prior();
        }
        for blocks in self.heads.values_mut() {
            for block in blocks {
                block.advance_prior();
            }
        }
    }

    /// KL summed over the trunk and the given heads.
    pub fn kl_total(&self, head_ids: &[&str]) -> Result<T> {
        let mut total = T::zero();
        for block in self.active_blocks(head_ids)? {
            total += kl_diag_gaussian(block)?;
        }
        Ok(total)
    }
}

/// Accumulates the scaled Monte-Carlo data term and its reparameterized
/// gradients for one head's batch. Returns the term's contribution to the
/// objective. Gradients are added on top of whatever is already stored.
fn accumulate_data_term<T: Scalar, R: Rng>(
    post: &mut PosteriorNet<T>,
    head: &str,
    inputs: &[Vec<T>],
    labels: &[usize],
    n_samples: usize,
    dataset_size: usize,
    rng: &mut R,
) -> Result<T> {
    if inputs.is_empty() {
        return Ok(T::zero());
    }
    let scale = T::of(dataset_size as f64 / n_samples as f64);
    let mut contribution = T::zero();
    for _ in 0..n_samples {
        let noise = post.draw_noise(&[head], rng)?;
        let mut net = post.sample_net(head, &noise)?;
        let mean_ce = loss_and_backprop(&mut net, inputs, labels, head)?;
        contribution += scale * mean_ce;

        let sampled_blocks = net.blocks();
        let active = post.active_blocks_mut(&[head])?;
        for (bi, block) in active.into_iter().enumerate() {
            let grads = &sampled_blocks[bi].grad;
            for i in 0..block.mean.value.len() {
                let g = grads[i] * scale;
                block.mean.grad[i] += g;
                // d w / d log sigma = sigma * eps.
                block.log_std.grad[i] += g * block.log_std.value[i].exp() * noise[bi][i];
            }
        }
    }
    Ok(contribution)
}

/// Negative ELBO for one head's batch:
/// `(N/B) * sum_batch MC-mean[-log p(y|x,w)] + KL(q || prior)`, with
/// reparameterized gradients written into the active blocks' grads.
pub fn elbo_objective<T: Scalar, R: Rng>(
    post: &mut PosteriorNet<T>,
    head: &str,
    inputs: &[Vec<T>],
    labels: &[usize],
    n_samples: usize,
    dataset_size: usize,
    rng: &mut R,
) -> Result<T> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    post.zero_grads(&[head])?;
    let mut objective = accumulate_data_term(post, head, inputs, labels, n_samples, dataset_size, rng)?;
    objective += post.kl_total(&[head])?;
    for block in post.active_blocks_mut(&[head])? {
        kl_grad_accumulate(block);
    }
    if !objective.is_finite() {
        return Err(Error::Divergence("non-finite ELBO objective".into()));
    }
    Ok(objective)
}

/// One batch of examples belonging to one head.
pub struct GroupBatch<'a, T> {
    pub head: &'a str,
    pub inputs: &'a [Vec<T>],
    pub labels: &'a [usize],
}

/// Negative ELBO over several head groups at once (used for coreset
/// fine-tuning): full-batch data term per group plus one KL over the trunk
/// and every involved head.
pub fn elbo_multi_group<T: Scalar, R: Rng>(
    post: &mut PosteriorNet<T>,
    groups: &[GroupBatch<'_, T>],
    n_samples: usize,
    rng: &mut R,
) -> Result<T> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let head_ids: Vec<&str> = groups.iter().map(|g| g.head).collect();
    post.zero_grads(&head_ids)?;
    let mut objective = T::zero();
    for group in groups {
        objective += accumulate_data_term(
            post,
            group.head,
            group.inputs,
            group.labels,
            n_samples,
            group.inputs.len(),
            rng,
        )?;
    }
    objective += post.kl_total(&head_ids)?;
    for block in post.active_blocks_mut(&head_ids)? {
        kl_grad_accumulate(block);
    }
    if !objective.is_finite() {
        return Err(Error::Divergence("non-finite ELBO objective".into()));
    }
    Ok(objective)
}

/// Predictive probabilities averaged over Monte-Carlo weight draws.
pub fn predict_probs<T: Scalar, R: Rng>(
    post: &PosteriorNet<T>,
    head: &str,
    inputs: &[Vec<T>],
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let out_dim = post.head_out_dim(head)?;
    let mut totals = vec![vec![T::zero(); out_dim]; inputs.len()];
    for _ in 0..n_samples {
        let noise = post.draw_noise(&[head], rng)?;
        let net = post.sample_net(head, &noise)?;
        let (logits, _) = net.forward(inputs, head)?;
        for (acc, row) in totals.iter_mut().zip(&logits) {
            for (a, p) in acc.iter_mut().zip(softmax(row)) {
                *a += p;
            }
        }
    }
    let inv = T::of(1.0 / n_samples as f64);
    for row in &mut totals {
        for p in row.iter_mut() {
            *p *= inv;
        }
    }
    Ok(totals)
}
