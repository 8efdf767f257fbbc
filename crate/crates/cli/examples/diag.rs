use std::collections::BTreeMap;
use forgetlab::algos::{run_sequence, Algorithm};
use forgetlab::data::TaskSequence;
use forgetlab::embed::task_complexity;
use forgetlab::stats::{correlate, PairedSample};
use forgetlab_cli::config::load_config;
use forgetlab_cli::orchestrate::Workspace;
use forgetlab_cli::results::read_results_csv;

fn main() {
    let config = load_config(std::env::args().nth(1).unwrap()).unwrap();
    let ws = Workspace::load(config).unwrap();
    let probe = ws.probe().unwrap();
    let tasks = ws.materialize_all().unwrap();
    let embeddings = ws.embeddings(&probe, &tasks).unwrap();
    let run_config = ws.config.run_config(ws.train.input_width()).unwrap();

    // Single-task test error per unit task (mean over 5 seeds).
    let mut single_err: BTreeMap<_, f64> = BTreeMap::new();
    for (&task, _) in &tasks {
        let seq = TaskSequence::new(vec![task]).unwrap();
        let mut total = 0.0;
        for seed in 0..5u64 {
            let rec = run_sequence(Algorithm::Si, &seq, &tasks, &run_config, seed).unwrap();
            total += rec.errors[0][0];
        }
        single_err.insert(task, total / 5.0);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    println!("task  C(t)      single_err");
    for (&task, data) in &tasks {
        let _ = data;
        let c = task_complexity(embeddings.get(task).unwrap(), &embeddings.trivial).unwrap();
        let e = single_err[&task];
        println!("{}  {:.6}  {:.4}", task, c, e);
        xs.push(c);
        ys.push(e);
    }
    let r = correlate(&PairedSample::new(xs, ys).unwrap()).unwrap();
    println!("C(t) vs single-task error: r={:.3} p={:.4} m={}", r.r, r.p, r.m);

    // Oracle check: final_error vs sum of single-task errors per sequence.
    if let Ok(rows) = read_results_csv(ws.config.out_dir.join("results.csv")) {
        for algo in ["si", "vcl", "coreset-vcl"] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut cs = Vec::new();
            for row in rows.iter().filter(|r| r.algorithm.to_string() == algo) {
                let difficulty: f64 = row.sequence.tasks().iter().map(|t| single_err[t]).sum();
                xs.push(difficulty);
                ys.push(row.final_error);
                cs.push(row.total_complexity);
            }
            if xs.len() >= 3 {
                let r1 = correlate(&PairedSample::new(xs.clone(), ys.clone()).unwrap()).unwrap();
                let r2 = correlate(&PairedSample::new(cs.clone(), xs.clone()).unwrap()).unwrap();
                println!("{algo}: final_error vs sum(single_err): r={:.3} p={:.4}; C(T) vs sum(single_err): r={:.3} p={:.4}",
                    r1.r, r1.p, r2.r, r2.p);
            }
        }
    }
}
