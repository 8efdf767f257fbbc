use std::collections::BTreeMap;
use forgetlab::algos::{run_sequence, Algorithm, RunConfig};
use forgetlab::data::{sample_sequences, TaskSequence};
use forgetlab::embed::{
    embed_task, sequential_heterogeneity, total_complexity, train_probe, trivial_embedding,
    EmbedConfig, ProbeConfig,
};
use forgetlab::stats::{correlate, PairedSample};
use forgetlab::Embeddings;
use forgetlab_cli::config::load_config;
use forgetlab_cli::orchestrate::Workspace;

fn main() {
    let config = load_config(std::env::args().nth(1).unwrap()).unwrap();
    let ws = Workspace::load(config).unwrap();
    let tasks = ws.materialize_all().unwrap();
    let unit_tasks = ws.unit_tasks().unwrap();

    // Difficulty oracle: single-task error, 30-epoch minibatch training.
    let mut run_config = RunConfig::<f64>::with_defaults(ws.train.input_width(), vec![20]);
    run_config.si_epochs = 30;
    run_config.si_batch = 16;
    let mut single_err: BTreeMap<_, f64> = BTreeMap::new();
    for (&task, _) in &tasks {
        let seq = TaskSequence::new(vec![task]).unwrap();
        let mut total = 0.0;
        for seed in 0..5u64 {
            total += run_sequence(Algorithm::Si, &seq, &tasks, &run_config, seed).unwrap().errors[0][0];
        }
        single_err.insert(task, total / 5.0);
    }

    let sequences = sample_sequences(&unit_tasks, 120, 5, 7).unwrap();
    let sum_err: Vec<f64> = sequences
        .iter()
        .map(|s| s.tasks().iter().map(|t| single_err[t]).sum())
        .collect();

    for (hidden, epochs, head_steps, head_lr, tag) in [
        (vec![128usize, 128], 4usize, 100usize, 0.01, "p128x128e4/h100"),
        (vec![128, 128], 4, 25, 0.01, "p128x128e4/h25"),
        (vec![48, 48], 8, 100, 0.01, "p48x48e8/h100"),
        (vec![48, 48], 8, 25, 0.01, "p48x48e8/h25"),
        (vec![32], 12, 100, 0.01, "p32e12/h100"),
        (vec![32], 12, 25, 0.01, "p32e12/h25"),
        (vec![128, 128], 30, 25, 0.01, "p128x128e30/h25"),
    ] {
        let pc = ProbeConfig { hidden, epochs, batch: 128, learning_rate: 0.001 };
        let probe = train_probe(&ws.train, &pc, 42).unwrap();
        let head = EmbedConfig { head_steps, head_learning_rate: head_lr };
        let trivial = trivial_embedding(&probe, &ws.train.inputs, &head, 0).unwrap();
        let by_task: BTreeMap<_, _> = tasks
            .iter()
            .map(|(&t, d)| (t, embed_task(&probe, d, &head, 0).unwrap()))
            .collect();
        let embeddings = Embeddings { by_task, trivial };

        let mut c_t = Vec::new();
        let mut f_t = Vec::new();
        for seq in &sequences {
            c_t.push(total_complexity(seq, &embeddings).unwrap());
            f_t.push(sequential_heterogeneity(seq, &embeddings).unwrap());
        }
        let r_a = correlate(&PairedSample::new(c_t.clone(), sum_err.clone()).unwrap()).unwrap();
        let r_b = correlate(&PairedSample::new(f_t.clone(), sum_err.clone()).unwrap()).unwrap();
        let r_cf = correlate(&PairedSample::new(c_t.clone(), f_t.clone()).unwrap()).unwrap();
        let c_lo = c_t.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_hi = c_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{tag}: perr {:.3} | r(C,sumerr)={:+.3}(p={:.1e}) r(F,sumerr)={:+.3}(p={:.2}) r(C,F)={:+.2} | C(T) in [{:.3},{:.3}]",
            probe.meta.train_error, r_a.r, r_a.p, r_b.r, r_b.p, r_cf.r, c_lo, c_hi
        );
    }
}
