use std::collections::BTreeMap;
use forgetlab::algos::{run_sequence, Algorithm, RunConfig};
use forgetlab::data::TaskSequence;
use forgetlab::embed::{
    embed_task, sequential_heterogeneity, task_complexity, total_complexity, train_probe,
    trivial_embedding, EmbedConfig, ProbeConfig,
};
use forgetlab::stats::{correlate, PairedSample};
use forgetlab::{Embeddings, Probe};
use forgetlab_cli::config::load_config;
use forgetlab_cli::orchestrate::Workspace;
use forgetlab_cli::results::read_results_csv;

fn eval_probe(
    ws: &Workspace,
    probe: &Probe,
    head: &EmbedConfig,
    single_err: &BTreeMap<forgetlab::data::UnitTask, f64>,
    tag: &str,
) {
    let tasks = ws.materialize_all().unwrap();
    let trivial = trivial_embedding(probe, &ws.train.inputs, head, 0).unwrap();
    let by_task: BTreeMap<_, _> = tasks
        .iter()
        .map(|(&t, d)| (t, embed_task(probe, d, head, 0).unwrap()))
        .collect();
    let embeddings = Embeddings { by_task, trivial };

    let mut cs = Vec::new();
    let mut es = Vec::new();
    let mut norms = Vec::new();
    for (&task, _) in &tasks {
        let e = embeddings.get(task).unwrap();
        cs.push(task_complexity(e, &embeddings.trivial).unwrap());
        norms.push(e.values.iter().map(|v| v * v).sum::<f64>().sqrt().ln());
        es.push(single_err[&task]);
    }
    let r_c = correlate(&PairedSample::new(cs.clone(), es.clone()).unwrap()).map(|c| (c.r, c.p)).unwrap_or((f64::NAN, f64::NAN));
    let r_n = correlate(&PairedSample::new(norms, es.clone()).unwrap()).map(|c| (c.r, c.p)).unwrap_or((f64::NAN, f64::NAN));

    // Against the stored 60-sequence final errors.
    let rows = read_results_csv(ws.config.out_dir.join("results.csv")).unwrap();
    let mut report = String::new();
    for algo in ["si", "coreset-vcl"] {
        let mut xs = Vec::new();
        let mut hs = Vec::new();
        let mut ys = Vec::new();
        for row in rows.iter().filter(|r| r.algorithm.to_string() == algo) {
            let seq = TaskSequence::new(row.sequence.tasks().to_vec()).unwrap();
            xs.push(total_complexity(&seq, &embeddings).unwrap());
            hs.push(sequential_heterogeneity(&seq, &embeddings).unwrap());
            ys.push(row.final_error);
        }
        let ra = correlate(&PairedSample::new(xs, ys.clone()).unwrap()).unwrap();
        let rb = correlate(&PairedSample::new(hs, ys).unwrap()).unwrap();
        report.push_str(&format!("  {algo}: a(r={:+.3},p={:.3}) b(r={:+.3},p={:.3})", ra.r, ra.p, rb.r, rb.p));
    }
    println!(
        "{tag}: probe_err {:.3} | r(C,err)={:+.3}(p={:.3}) r(ln|e|,err)={:+.3}(p={:.3})\n{report}",
        probe.meta.train_error,
        r_c.0, r_c.1, r_n.0, r_n.1
    );
}

fn main() {
    let config = load_config(std::env::args().nth(1).unwrap()).unwrap();
    let ws = Workspace::load(config).unwrap();
    let tasks = ws.materialize_all().unwrap();

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

    let head = EmbedConfig { head_steps: 100, head_learning_rate: 0.01 };
    for (hidden, epochs, tag) in [
        (vec![128usize, 128], 30usize, "p128x128e30"),
        (vec![64], 30, "p64e30"),
        (vec![32], 12, "p32e12"),
        (vec![48, 48], 8, "p48x48e8"),
        (vec![128, 128], 4, "p128x128e4"),
    ] {
        let pc = ProbeConfig { hidden, epochs, batch: 128, learning_rate: 0.001 };
        let probe = train_probe(&ws.train, &pc, 42).unwrap();
        eval_probe(&ws, &probe, &head, &single_err, tag);
    }
}
