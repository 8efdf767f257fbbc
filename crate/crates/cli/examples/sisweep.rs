use std::collections::BTreeMap;
use forgetlab::algos::{final_hardness, run_sequence, Algorithm, RunConfig};
use forgetlab::data::sample_sequences;
use forgetlab::embed::{
    embed_task, sequential_heterogeneity, total_complexity, train_probe, trivial_embedding,
    EmbedConfig, ProbeConfig,
};
use forgetlab::rng;
use forgetlab::stats::{correlate, PairedSample};
use forgetlab::Embeddings;
use forgetlab_cli::config::load_config;
use forgetlab_cli::orchestrate::Workspace;
use rayon::prelude::*;

fn main() {
    let config = load_config(std::env::args().nth(1).unwrap()).unwrap();
    let ws = Workspace::load(config).unwrap();
    let tasks = ws.materialize_all().unwrap();
    let unit_tasks = ws.unit_tasks().unwrap();
    let sequences = sample_sequences(&unit_tasks, 60, 5, 7).unwrap();

    // SI with a schedule scaled to the small per-task corpus.
    let mut rc = RunConfig::<f64>::with_defaults(ws.train.input_width(), vec![20]);
    rc.si_epochs = 30;
    rc.si_batch = 64;

    let work: Vec<(usize, u64)> = (0..sequences.len())
        .flat_map(|i| (0..10u64).map(move |s| (i, s)))
        .collect();
    let t0 = std::time::Instant::now();
    let finals: Vec<(usize, f64)> = work
        .par_iter()
        .map(|&(i, seed)| {
            let rec = run_sequence(
                Algorithm::Si,
                &sequences[i],
                &tasks,
                &rc,
                rng::derive(seed, i as u64),
            )
            .unwrap();
            (i, final_hardness(&rec).unwrap())
        })
        .collect();
    eprintln!("SI-30 600 runs took {:?}", t0.elapsed());

    let mut mean_final = vec![0.0f64; sequences.len()];
    for &(i, err) in &finals {
        mean_final[i] += err / 10.0;
    }
    let lo = mean_final.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mean_final.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    eprintln!("SI-30 final errors in [{lo:.3}, {hi:.3}]");

    for (hidden, epochs, head_steps, tag) in [
        (vec![48usize, 48], 8usize, 100usize, "p48x48e8/h100"),
        (vec![32], 12, 100, "p32e12/h100"),
        (vec![128, 128], 4, 25, "p128x128e4/h25"),
    ] {
        let pc = ProbeConfig { hidden, epochs, batch: 128, learning_rate: 0.001 };
        let probe = train_probe(&ws.train, &pc, 42).unwrap();
        let head = EmbedConfig { head_steps, head_learning_rate: 0.01 };
        let trivial = trivial_embedding(&probe, &ws.train.inputs, &head, 0).unwrap();
        let by_task: BTreeMap<_, _> = tasks
            .iter()
            .map(|(&t, d)| (t, embed_task(&probe, d, &head, 0).unwrap()))
            .collect();
        let embeddings = Embeddings { by_task, trivial };

        let c_t: Vec<f64> = sequences.iter().map(|s| total_complexity(s, &embeddings).unwrap()).collect();
        let f_t: Vec<f64> = sequences.iter().map(|s| sequential_heterogeneity(s, &embeddings).unwrap()).collect();
        let ra = correlate(&PairedSample::new(c_t, mean_final.clone()).unwrap()).unwrap();
        let rb = correlate(&PairedSample::new(f_t, mean_final.clone()).unwrap()).unwrap();
        println!("{tag}: SI-30 a: r={:+.3} p={:.4} | b: r={:+.3} p={:.4}", ra.r, ra.p, rb.r, rb.p);
    }
}
