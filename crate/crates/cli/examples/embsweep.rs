use std::collections::BTreeMap;
use forgetlab::algos::{run_sequence, Algorithm, RunConfig};
use forgetlab::data::TaskSequence;
use forgetlab::embed::{embed_task, task_complexity, trivial_embedding, EmbedConfig};
use forgetlab::stats::{correlate, PairedSample};
use forgetlab_cli::config::load_config;
use forgetlab_cli::orchestrate::Workspace;

fn main() {
    let config = load_config(std::env::args().nth(1).unwrap()).unwrap();
    let ws = Workspace::load(config).unwrap();
    let probe = ws.probe().unwrap();
    let tasks = ws.materialize_all().unwrap();

    // Single-task difficulty with a decently trained net (batch 16, 30 epochs).
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

    for (steps, lr) in [(50usize, 0.01), (100, 0.01), (200, 0.01), (50, 0.05), (100, 0.05), (400, 0.05)] {
        let cfg = EmbedConfig { head_steps: steps, head_learning_rate: lr };
        let trivial = trivial_embedding(&probe, &ws.train.inputs, &cfg, 0).unwrap();
        let tnorm: f64 = trivial.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut cs = Vec::new();
        let mut es = Vec::new();
        for (&task, data) in &tasks {
            let emb = embed_task(&probe, data, &cfg, 0).unwrap();
            cs.push(task_complexity(&emb, &trivial).unwrap());
            es.push(single_err[&task]);
        }
        let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r = correlate(&PairedSample::new(cs.clone(), es.clone()).unwrap());
        match r {
            Ok(r) => println!("steps {steps:>3} lr {lr:.2}: e0norm {tnorm:.2e} C(t) in [{lo:.4},{hi:.4}] r(C,err)={:.3} p={:.4}", r.r, r.p),
            Err(e) => println!("steps {steps:>3} lr {lr:.2}: e0norm {tnorm:.2e} C(t) in [{lo:.4},{hi:.4}] corr err: {e}"),
        }
    }
}
