//! Softmax cross-entropy with hand-derived backpropagation.

use crate::error::{Error, Result};
use crate::nn::net::{Activation, MultiHeadNet};
use crate::scalar::Scalar;

/// Numerically stable softmax of one logit row.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy of a batch, with gradients written into the trunk and
/// the selected head. Heads other than `head` receive exactly zero gradient.
///
/// Labels index the head's logits; for the binary unit tasks of the pipeline
/// they must be 0 or 1.
pub fn loss_and_backprop<T: Scalar>(
    net: &mut MultiHeadNet<T>,
    inputs: &[Vec<T>],
    labels: &[usize],
    head: &str,
) -> Result<T> {
    if inputs.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "batch has {} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let out_dim = net.head(head)?.out_dim();
    if let Some(&bad) = labels.iter().find(|&&y| y >= out_dim) {
        return Err(Error::Data(format!(
            "label {bad} outside [0, {out_dim}) for head '{head}'"
        )));
    }

    let (logits, trace) = net.forward(inputs, head)?;
    net.zero_grads();

    let batch = inputs.len();
    let scale = T::of(1.0 / batch as f64);
    let mut loss = T::zero();
    // d(mean loss)/d(logits): (softmax - onehot) / batch.
    let mut dlogits = Vec::with_capacity(batch);
    for (row, &y) in logits.iter().zip(labels) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
        loss += (lse - row[y]) * scale;
        let mut d: Vec<T> = row.iter().map(|&z| (z - lse).exp() * scale).collect();
        d[y] = d[y] - scale;
        dlogits.push(d);
    }

    // Head layer, plus the gradient flowing into the trunk features.
    let features = trace.features();
    let feat_width = features[0].len();
    let mut dact = vec![vec![T::zero(); feat_width]; batch];
    {
        let head_layer = net.head_mut(head)?;
        for b in 0..batch {
            for o in 0..out_dim {
                let d = dlogits[b][o];
                head_layer.biases.grad[o] += d;
                let row = o * feat_width;
                for i in 0..feat_width {
                    head_layer.weights.grad[row + i] += d * features[b][i];
                    dact[b][i] += head_layer.weights.value[row + i] * d;
                }
            }
        }
    }

    // Trunk layers, last to first.
    for l in (0..net.trunk().len()).rev() {
        let prev_act = &trace.activations[l];
        let cur_act = &trace.activations[l + 1];
        let layer = &mut net.trunk_mut()[l];
        let (in_dim, layer_out) = (layer.in_dim(), layer.out_dim());
        let mut dprev = vec![vec![T::zero(); in_dim]; batch];
        for b in 0..batch {
            for o in 0..layer_out {
                let mut dz = dact[b][o];
                if layer.activation() == Activation::Relu && cur_act[b][o] <= T::zero() {
                    dz = T::zero();
                }
                if dz == T::zero() {
                    continue;
                }
                layer.biases.grad[o] += dz;
                let row = o * in_dim;
                for i in 0..in_dim {
                    layer.weights.grad[row + i] += dz * prev_act[b][i];
                    dprev[b][i] += layer.weights.value[row + i] * dz;
                }
            }
        }
        dact = dprev;
    }

    Ok(loss)
}

/// Softmax probabilities for a batch under the selected head.
pub fn batch_probs<T: Scalar>(
    net: &MultiHeadNet<T>,
    inputs: &[Vec<T>],
    head: &str,
) -> Result<Vec<Vec<T>>> {
    let (logits, _) = net.forward(inputs, head)?;
    Ok(logits.iter().map(|row| softmax(row)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn zeroed_net(input: usize, hidden: &[usize]) -> MultiHeadNet<f64> {
        let mut net = MultiHeadNet::new(input, hidden, &mut stream(0, 0)).unwrap();
        for layer in net.trunk_mut() {
            layer.weights.value.iter_mut().for_each(|w| *w = 0.0);
        }
        net
    }

    #[test]
    fn symmetric_logits_give_ln2_loss_and_half_gradient() {
        let mut net = zeroed_net(2, &[2]);
        net.add_head("t", 2, &mut stream(0, 1));
        net.head_mut("t").unwrap().weights.value.iter_mut().for_each(|w| *w = 0.0);

        let loss = loss_and_backprop(&mut net, &[vec![1.0, -1.0]], &[0], "t").unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // Bias gradient of the head equals d(loss)/d(logits).
        let head = net.head("t").unwrap();
        assert!((head.biases.grad[0] + 0.5).abs() < 1e-12);
        assert!((head.biases.grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_saturates_to_zero() {
        let mut net = zeroed_net(1, &[1]);
        {
            let layer = &mut net.trunk_mut()[0];
            layer.weights.value[0] = 1.0;
        }
        net.add_head("t", 2, &mut stream(0, 1));
        {
            let head = net.head_mut("t").unwrap();
            head.weights.value.copy_from_slice(&[50.0, -50.0]);
        }
        let loss = loss_and_backprop(&mut net, &[vec![1.0]], &[0], "t").unwrap();
        assert!(loss < 1e-40, "loss {loss}");
        assert!(net.head("t").unwrap().weights.grad.iter().all(|g| g.abs() < 1e-40));
    }

    #[test]
    fn rejects_empty_batch_and_bad_labels() {
        let mut net = zeroed_net(2, &[2]);
        net.add_head("t", 2, &mut stream(0, 1));
        assert!(matches!(
            loss_and_backprop(&mut net, &[], &[], "t"),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            loss_and_backprop(&mut net, &[vec![0.0, 0.0]], &[2], "t"),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn other_heads_receive_zero_gradient() {
        let mut rng = stream(9, 0);
        let mut net = MultiHeadNet::<f64>::new(3, &[4], &mut rng).unwrap();
        net.add_head("a", 2, &mut rng);
        net.add_head("b", 2, &mut rng);
        let batch: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        loss_and_backprop(&mut net, &batch, &[0, 1, 0, 1], "a").unwrap();
        let other = net.head("b").unwrap();
        assert!(other.weights.grad.iter().all(|&g| g == 0.0));
        assert!(other.biases.grad.iter().all(|&g| g == 0.0));
        assert!(net.head("a").unwrap().weights.grad.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn analytic_gradients_match_central_finite_differences() {
        let mut rng = stream(17, 0);
        let mut net = MultiHeadNet::<f64>::new(8, &[10, 8], &mut rng).unwrap();
        net.add_head("t", 2, &mut rng);
        let batch: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();

        loss_and_backprop(&mut net, &batch, &labels, "t").unwrap();
        let analytic: Vec<Vec<f64>> = net.blocks().iter().map(|b| b.grad.clone()).collect();

        let h = 1e-3;
        let mut checked = 0usize;
        let mut skipped = 0usize;
        let n_blocks = net.blocks().len();
        for bi in 0..n_blocks {
            for ei in 0..analytic[bi].len() {
                let mut fd_at = |step: f64| {
                    let orig = net.blocks_mut()[bi].value[ei];
                    net.blocks_mut()[bi].value[ei] = orig + step;
                    let up = loss_and_backprop(&mut net, &batch, &labels, "t").unwrap();
                    net.blocks_mut()[bi].value[ei] = orig - step;
                    let down = loss_and_backprop(&mut net, &batch, &labels, "t").unwrap();
                    net.blocks_mut()[bi].value[ei] = orig;
                    (up - down) / (2.0 * step)
                };
                let fd = fd_at(h);
                let fd_half = fd_at(h / 2.0);
                let g = analytic[bi][ei];
                if g.abs() < 1e-7 && fd.abs() < 1e-7 {
                    continue;
                }
                // A rectifier kink inside the stencil makes the difference
                // quotient meaningless; central differences of a smooth loss
                // barely move when the step halves.
                if (fd - fd_half).abs() > 1e-6 * fd.abs().max(fd_half.abs()).max(1e-3) {
                    skipped += 1;
                    continue;
                }
                let rel = (g - fd).abs() / g.abs().max(fd.abs());
                assert!(rel < 1e-4, "block {bi} elem {ei}: analytic {g}, fd {fd}");
                checked += 1;
            }
        }
        assert!(checked >= 100, "only {checked} coordinates checked ({skipped} skipped)");
    }
}
