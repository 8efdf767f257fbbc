//! Continual-learning algorithms over multi-head networks, sequence-level
//! evaluation, and the hardness measure.

mod coreset;
mod runner;
mod si;
mod vcl;

pub use coreset::{select_coreset, Coreset, CoresetSplit};
pub use runner::{final_hardness, run_sequence, streams, Algorithm, RunConfig, RunRecord};
pub use si::{si_consolidate, si_path_update, si_penalty, SiState};
pub use vcl::{
    elbo_multi_group, elbo_objective, kl_diag_gaussian, predict_probs, GaussianPosterior,
    GroupBatch, PosteriorNet,
};

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::data::{LabeledDataset, TaskData, TaskSequence, UnitTask};
    use crate::nn::{adam_step, loss_and_backprop, MultiHeadNet};
    use crate::rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// Five linearly separable binary tasks over a shared 2-D input space.
    /// Class 0 sits left of the origin, class 1 right of it, with per-task
    /// vertical offsets so tasks differ without conflicting.
    fn separable_tasks() -> (Vec<UnitTask>, BTreeMap<UnitTask, TaskData<f64>>) {
        let mut map = BTreeMap::new();
        let mut list = Vec::new();
        for t in 0..5usize {
            let task = UnitTask::new(t, t + 5).unwrap();
            let mut rng = rng::stream(900 + t as u64, 0);
            let make = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
                let mut inputs = Vec::new();
                let mut labels = Vec::new();
                for i in 0..n {
                    let y = i % 2;
                    let x0 = if y == 0 { -2.0 } else { 2.0 };
                    inputs.push(vec![
                        x0 + (rng.random::<f64>() - 0.5),
                        t as f64 * 0.5 + (rng.random::<f64>() - 0.5),
                    ]);
                    labels.push(y);
                }
                LabeledDataset::new(inputs, labels, 2).unwrap()
            };
            let train = make(&mut rng, 80);
            let test = make(&mut rng, 40);
            map.insert(
                task,
                TaskData {
                    train,
                    test,
                    origin: task,
                },
            );
            list.push(task);
        }
        (list, map)
    }

    fn test_config() -> RunConfig<f64> {
        let mut config = RunConfig::with_defaults(2, vec![8]);
        // A fresh random head can start out confidently wrong on features a
        // previously-trained trunk already separates; give each task enough
        // steps to swing it around.
        config.si_epochs = 60;
        config.si_batch = 16;
        config.vcl_epochs = 300;
        config.optimizer.learning_rate = 0.01;
        config.mc_train = 5;
        config.mc_eval = 40;
        config.coreset_size = 10;
        config
    }

    #[test]
    fn all_algorithms_master_separable_tasks() {
        let (list, map) = separable_tasks();
        let sequence = TaskSequence::new(list).unwrap();
        let config = test_config();
        for algorithm in Algorithm::ALL {
            let record = run_sequence(algorithm, &sequence, &map, &config, 0).unwrap();
            assert_eq!(record.errors.len(), 5);
            for (i, row) in record.errors.iter().enumerate() {
                assert_eq!(row.len(), i + 1);
                for (j, &err) in row.iter().enumerate() {
                    assert!(
                        err < 0.05,
                        "{algorithm}: error[{i}][{j}] = {err} on separable data"
                    );
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let (list, map) = separable_tasks();
        let sequence = TaskSequence::new(list[..3].to_vec()).unwrap();
        let mut config = test_config();
        config.vcl_epochs = 30;
        config.mc_eval = 10;
        for algorithm in Algorithm::ALL {
            let a = run_sequence(algorithm, &sequence, &map, &config, 7).unwrap();
            let b = run_sequence(algorithm, &sequence, &map, &config, 7).unwrap();
            assert_eq!(a.errors, b.errors, "{algorithm} not deterministic");
            let c = run_sequence(algorithm, &sequence, &map, &config, 8).unwrap();
            assert!(
                a.errors != c.errors || a.seed != c.seed,
                "{algorithm}: different seeds produced identical records"
            );
        }
    }

    /// Plain sequential fine-tuning re-implemented from the public training
    /// primitives, mirroring the runner's stream layout.
    fn fine_tune_mirror(
        sequence: &TaskSequence,
        tasks: &BTreeMap<UnitTask, TaskData<f64>>,
        config: &RunConfig<f64>,
        seed: u64,
    ) -> MultiHeadNet<f64> {
        let mut net = MultiHeadNet::new(
            config.input_width,
            &config.hidden,
            &mut rng::stream(seed, streams::INIT),
        )
        .unwrap();
        for (i, &task) in sequence.tasks().iter().enumerate() {
            let data = &tasks[&task];
            let head = task.notation();
            net.add_head(
                &head,
                2,
                &mut rng::stream(seed, streams::task(i, streams::HEAD_INIT)),
            );
            net.reset_optimizer();
            let mut order: Vec<usize> = (0..data.train.len()).collect();
            let mut shuffle_rng = rng::stream(seed, streams::task(i, streams::SHUFFLE));
            for _ in 0..config.si_epochs {
                order.shuffle(&mut shuffle_rng);
                for chunk in order.chunks(config.si_batch) {
                    let inputs: Vec<Vec<f64>> =
                        chunk.iter().map(|&ix| data.train.inputs[ix].clone()).collect();
                    let labels: Vec<usize> =
                        chunk.iter().map(|&ix| data.train.labels[ix]).collect();
                    loss_and_backprop(&mut net, &inputs, &labels, &head).unwrap();
                    for layer in net.trunk_mut() {
                        adam_step(&mut layer.weights, &config.optimizer).unwrap();
                        adam_step(&mut layer.biases, &config.optimizer).unwrap();
                    }
                    let head_layer = net.head_mut(&head).unwrap();
                    adam_step(&mut head_layer.weights, &config.optimizer).unwrap();
                    adam_step(&mut head_layer.biases, &config.optimizer).unwrap();
                }
            }
        }
        net
    }

    #[test]
    fn si_with_zero_strength_is_exactly_sequential_fine_tuning() {
        let (list, map) = separable_tasks();
        let sequence = TaskSequence::new(list[..3].to_vec()).unwrap();
        let mut config = test_config();
        config.lambda = 0.0;

        // Run SI; then reproduce the parameters with a plain fine-tuner.
        let record = run_sequence(Algorithm::Si, &sequence, &map, &config, 21).unwrap();
        let mirror = fine_tune_mirror(&sequence, &map, &config, 21);

        // Errors of the mirror must match the recorded final row bit-for-bit.
        for (j, &seen) in sequence.tasks().iter().enumerate() {
            let data = &map[&seen];
            let probs = crate::nn::batch_probs(&mirror, &data.test.inputs, &seen.notation()).unwrap();
            let err = probs
                .iter()
                .zip(&data.test.labels)
                .filter(|(p, &y)| usize::from(p[1] > p[0]) != y)
                .count() as f64
                / data.test.labels.len() as f64;
            assert_eq!(err, record.errors[2][j], "task {j} error differs");
        }
    }

    #[test]
    fn singleton_sequence_reduces_to_single_task_training() {
        let (list, map) = separable_tasks();
        let sequence = TaskSequence::new(vec![list[0]]).unwrap();
        let config = test_config();
        let record = run_sequence(Algorithm::Si, &sequence, &map, &config, 3).unwrap();
        assert_eq!(record.errors.len(), 1);
        assert_eq!(record.errors[0].len(), 1);

        let mirror = fine_tune_mirror(&sequence, &map, &config, 3);
        let data = &map[&list[0]];
        let probs = crate::nn::batch_probs(&mirror, &data.test.inputs, &list[0].notation()).unwrap();
        let err = probs
            .iter()
            .zip(&data.test.labels)
            .filter(|(p, &y)| usize::from(p[1] > p[0]) != y)
            .count() as f64
            / data.test.labels.len() as f64;
        assert_eq!(record.errors[0][0], err);
    }

    #[test]
    fn unmaterialized_task_is_rejected() {
        let (list, map) = separable_tasks();
        let missing = UnitTask::new(100, 101).unwrap();
        let sequence = TaskSequence::new(vec![list[0], missing]).unwrap();
        assert!(run_sequence(Algorithm::Si, &sequence, &map, &test_config(), 0).is_err());
    }

    #[test]
    fn final_hardness_averages_the_last_row() {
        let seq = TaskSequence::new(vec![
            UnitTask::new(0, 1).unwrap(),
            UnitTask::new(2, 3).unwrap(),
            UnitTask::new(4, 5).unwrap(),
        ])
        .unwrap();
        let record = RunRecord::new(
            seq,
            vec![vec![0.5], vec![0.4, 0.1], vec![0.1, 0.2, 0.3]],
            Algorithm::Si,
            0,
        )
        .unwrap();
        assert!((final_hardness(&record).unwrap() - 0.2).abs() < 1e-15);

        let singleton = TaskSequence::new(vec![UnitTask::new(0, 1).unwrap()]).unwrap();
        let record = RunRecord::new(singleton, vec![vec![0.25]], Algorithm::Vcl, 0).unwrap();
        assert_eq!(final_hardness(&record).unwrap(), 0.25);
    }

    #[test]
    fn malformed_records_are_rejected() {
        let seq = TaskSequence::new(vec![
            UnitTask::new(0, 1).unwrap(),
            UnitTask::new(2, 3).unwrap(),
        ])
        .unwrap();
        // Wrong triangular shape.
        assert!(RunRecord::new(seq.clone(), vec![vec![0.1], vec![0.2]], Algorithm::Si, 0).is_err());
        // Error outside [0, 1].
        assert!(
            RunRecord::new(seq.clone(), vec![vec![0.1], vec![0.2, 1.5]], Algorithm::Si, 0).is_err()
        );
        // Incomplete record.
        assert!(RunRecord::new(seq, vec![vec![0.1]], Algorithm::Si, 0).is_err());
    }
}
