//! The experiment pipeline: probe, embeddings, sequence plan, training runs,
//! and seed aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use forgetlab::algos::{final_hardness, run_sequence, Algorithm};
use forgetlab::data::{
    greedy_extreme_sequence, load_idx, make_unit_tasks, materialize_task,
    sample_permutation_sequences, sample_sequences, Direction, TaskSequence, UnitTask,
};
use forgetlab::embed::{
    embed_task, sequential_heterogeneity, total_complexity, train_probe, trivial_embedding,
    CacheManifest, EmbeddingCache, ProbeMeta, TaskKey,
};
use forgetlab::nn::{Activation, DenseLayer, ParamBlock};
use forgetlab::rng;
use forgetlab::{Dataset, Embeddings, Error, Probe, Result, Task};

use crate::config::{ExperimentConfig, PlanConfig};
use crate::results::{PlanKind, ResultRow};

/// A sequence scheduled for training, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSequence {
    pub seq_id: usize,
    pub sequence: TaskSequence,
    pub plan: PlanKind,
}

/// One (sequence, algorithm, seed) outcome kept for per-seed analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seq_id: usize,
    pub algorithm: String,
    pub seed: u64,
    pub final_error: f64,
}

/// A run excluded from aggregation because training diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergedRun {
    pub seq_id: usize,
    pub algorithm: String,
    pub seed: u64,
    pub message: String,
}

/// Everything `run` produces besides the CSV itself.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub per_seed: Vec<SeedOutcome>,
    pub diverged: Vec<DivergedRun>,
    pub planned_runs: usize,
    pub probe_id: String,
}

/// Sidecar metadata written next to the results CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub probe_id: String,
    pub setting: String,
    pub algorithms: Vec<String>,
    pub seeds: Vec<u64>,
    pub planned_runs: usize,
    pub emitted_rows: usize,
    pub diverged: Vec<DivergedRun>,
    pub per_seed: Vec<SeedOutcome>,
}

/// Loaded datasets plus the config that selected them.
pub struct Workspace {
    pub config: ExperimentConfig,
    pub train: Dataset,
    pub test: Dataset,
}

fn fingerprint(train: &Dataset) -> u64 {
    // FNV-1a over dimensions, labels, and a pixel sample; enough to notice
    // a swapped dataset behind an unchanged config.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    eat(train.len() as u64);
    eat(train.input_width() as u64);
    for &y in &train.labels {
        eat(y as u64);
    }
    for row in train.inputs.iter().step_by(97) {
        for v in row.iter().step_by(13) {
            eat(v.to_bits());
        }
    }
    h
}

impl Workspace {
    pub fn load(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let train = load_idx(&config.dataset.train_images, &config.dataset.train_labels)?;
        let test = load_idx(&config.dataset.test_images, &config.dataset.test_labels)?;
        if train.input_width() != test.input_width() {
            return Err(Error::Data(format!(
                "train width {} does not match test width {}",
                train.input_width(),
                test.input_width()
            )));
        }
        Ok(Self {
            config,
            train,
            test,
        })
    }

    pub fn cache(&self) -> EmbeddingCache {
        EmbeddingCache::new(self.config.out_dir.join("cache"))
    }

    fn probe_path(&self, probe_id: &str) -> PathBuf {
        self.config.out_dir.join("cache").join(format!("{probe_id}.probe.json"))
    }

    /// The probe id this workspace will produce (config, seed, and a
    /// dataset fingerprint).
    pub fn probe_id(&self) -> String {
        format!(
            "probe-{:016x}-s{}-{}",
            fingerprint(&self.train),
            self.config.probe.seed,
            self.config
                .probe
                .config
                .hidden
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join("x")
        )
    }

    /// Trains the probe on the pooled training data, or loads it from the
    /// on-disk cache.
    pub fn probe(&self) -> Result<Probe> {
        let id = self.probe_id();
        let path = self.probe_path(&id);
        if path.exists() {
            return load_probe(&path, &id);
        }
        let trained = train_probe(&self.train, &self.config.probe.config, self.config.probe.seed)?;
        // Re-key under the workspace id, which also covers the dataset.
        let probe = Probe::from_parts(trained.trunk().to_vec(), id.clone(), trained.meta.clone());
        store_probe(&probe, &path)?;
        Ok(probe)
    }

    pub fn unit_tasks(&self) -> Result<Vec<UnitTask>> {
        make_unit_tasks(&self.train)
    }

    /// Materializes every unit task with the configured per-label cap.
    pub fn materialize_all(&self) -> Result<BTreeMap<UnitTask, Task>> {
        let tasks = self.unit_tasks()?;
        tasks
            .par_iter()
            .enumerate()
            .map(|(idx, &task)| {
                let data = materialize_task(
                    &self.train,
                    &self.test,
                    task,
                    self.config.cap_per_label,
                    rng::derive(self.config.data_seed, idx as u64),
                )?;
                Ok((task, data))
            })
            .collect()
    }

    /// Embeds every unit task plus the trivial task, reading and writing
    /// the on-disk cache.
    pub fn embeddings(&self, probe: &Probe, tasks: &BTreeMap<UnitTask, Task>) -> Result<Embeddings> {
        let cache = self.cache();
        let embed_config = self.config.probe.embed_config();
        let ordered: Vec<(&UnitTask, &Task)> = tasks.iter().collect();

        let by_task: BTreeMap<UnitTask, forgetlab::Embedding> = ordered
            .par_iter()
            .enumerate()
            .map(|(idx, (task, data))| {
                let key = TaskKey::Task(**task);
                if let Some(hit) = cache.load(&probe.id, &key)? {
                    return Ok((**task, hit));
                }
                let seed = rng::derive(self.config.probe.seed, 1000 + idx as u64);
                let emb = embed_task(probe, data, &embed_config, seed)?;
                cache.store(&emb)?;
                Ok((**task, emb))
            })
            .collect::<Result<_>>()?;

        let trivial = match cache.load(&probe.id, &TaskKey::Trivial)? {
            Some(hit) => hit,
            None => {
                let seed = rng::derive(self.config.probe.seed, 999);
                let emb = trivial_embedding(probe, &self.train.inputs, &embed_config, seed)?;
                cache.store(&emb)?;
                emb
            }
        };

        let mut embed_seeds: BTreeMap<String, u64> = ordered
            .iter()
            .enumerate()
            .map(|(idx, (task, _))| {
                (
                    task.notation(),
                    rng::derive(self.config.probe.seed, 1000 + idx as u64),
                )
            })
            .collect();
        embed_seeds.insert("trivial".into(), rng::derive(self.config.probe.seed, 999));
        cache.write_manifest(
            &probe.id,
            &CacheManifest {
                probe: self.config.probe.config.clone(),
                probe_meta: probe.meta.clone(),
                embed: embed_config,
                embed_seeds,
                unit_count: probe.unit_count,
            },
        )?;

        Ok(Embeddings { by_task, trivial })
    }

    /// Expands the config's plan into concrete sequences.
    pub fn plan(&self, embeddings: &Embeddings) -> Result<Vec<PlannedSequence>> {
        let tasks = self.unit_tasks()?;
        let planned = match &self.config.plan {
            PlanConfig::Random { count, length, seed } => {
                sample_sequences(&tasks, *count, *length, *seed)?
                    .into_iter()
                    .map(|s| (s, PlanKind::Random))
                    .collect::<Vec<_>>()
            }
            PlanConfig::Permutations { base, count, seed } => {
                let base: Vec<UnitTask> = base
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<_>>>()?;
                sample_permutation_sequences(&base, *count, *seed)?
                    .into_iter()
                    .map(|s| (s, PlanKind::Permutations))
                    .collect()
            }
            PlanConfig::Explicit { sequences } => sequences
                .iter()
                .map(|s| Ok((TaskSequence::parse(s)?, PlanKind::Explicit)))
                .collect::<Result<Vec<_>>>()?,
            PlanConfig::GreedyExtremes { start, length } => {
                let start: UnitTask = start.parse()?;
                let complexity = embeddings.complexity_map()?;
                let high =
                    greedy_extreme_sequence(&tasks, &complexity, Direction::Highest, start, *length)?;
                let low =
                    greedy_extreme_sequence(&tasks, &complexity, Direction::Lowest, start, *length)?;
                vec![(high, PlanKind::GreedyHigh), (low, PlanKind::GreedyLow)]
            }
        };
        Ok(planned
            .into_iter()
            .enumerate()
            .map(|(seq_id, (sequence, plan))| PlannedSequence {
                seq_id,
                sequence,
                plan,
            })
            .collect())
    }

    /// Seeds after applying a CLI offset.
    pub fn seeds(&self, seed_offset: u64) -> Vec<u64> {
        self.config
            .seeds
            .iter()
            .map(|s| s.wrapping_add(seed_offset))
            .collect()
    }
}

fn store_probe(probe: &Probe, path: &PathBuf) -> Result<()> {
    #[derive(Serialize)]
    struct LayerOut<'a> {
        in_dim: usize,
        out_dim: usize,
        weights: &'a [f64],
        biases: &'a [f64],
    }
    #[derive(Serialize)]
    struct ProbeOut<'a> {
        id: &'a str,
        meta: &'a ProbeMeta,
        layers: Vec<LayerOut<'a>>,
    }
    let out = ProbeOut {
        id: &probe.id,
        meta: &probe.meta,
        layers: probe
            .trunk()
            .iter()
            .map(|l| LayerOut {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                weights: &l.weights.value,
                biases: &l.biases.value,
            })
            .collect(),
    };
    fs::create_dir_all(path.parent().unwrap())?;
    let json = serde_json::to_string(&out).map_err(|e| Error::Data(format!("probe serialization: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

fn load_probe(path: &PathBuf, expect_id: &str) -> Result<Probe> {
    #[derive(Deserialize)]
    struct LayerIn {
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    }
    #[derive(Deserialize)]
    struct ProbeIn {
        id: String,
        meta: ProbeMeta,
        layers: Vec<LayerIn>,
    }
    let text = fs::read_to_string(path)?;
    let parsed: ProbeIn =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("corrupt probe cache {path:?}: {e}")))?;
    if parsed.id != expect_id {
        return Err(Error::Data(format!(
            "probe cache {path:?} holds '{}', expected '{expect_id}'",
            parsed.id
        )));
    }
    let trunk: Vec<DenseLayer<f64>> = parsed
        .layers
        .into_iter()
        .map(|l| {
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::Data(format!("corrupt probe cache {path:?}: bad shapes")));
            }
            let mut layer = DenseLayer::zeros(l.in_dim, l.out_dim, Activation::Relu);
            layer.weights = ParamBlock::from_values(l.weights);
            layer.biases = ParamBlock::from_values(l.biases);
            Ok(layer)
        })
        .collect::<Result<_>>()?;
    Ok(Probe::from_parts(trunk, parsed.id, parsed.meta))
}

/// Runs every (sequence, algorithm, seed) combination, aggregates per
/// (sequence, algorithm) over seeds, and attaches the property measures.
pub fn orchestrate_experiment(
    ws: &Workspace,
    jobs: usize,
    seed_offset: u64,
) -> Result<ExperimentOutput> {
    let probe = ws.probe()?;
    let tasks = ws.materialize_all()?;
    let embeddings = ws.embeddings(&probe, &tasks)?;
    let planned = ws.plan(&embeddings)?;
    let algorithms = ws.config.parsed_algorithms()?;
    let seeds = ws.seeds(seed_offset);
    let run_config = ws.config.run_config(ws.train.input_width())?;

    struct WorkItem<'a> {
        planned: &'a PlannedSequence,
        algorithm: Algorithm,
        seed: u64,
    }
    let mut items = Vec::new();
    for planned_seq in &planned {
        for &algorithm in &algorithms {
            for &seed in &seeds {
                items.push(WorkItem {
                    planned: planned_seq,
                    algorithm,
                    seed,
                });
            }
        }
    }
    let planned_runs = items.len();

    enum RunOutcome {
        Done { final_error: f64, errors: Vec<Vec<f64>> },
        Diverged { message: String },
    }

    let run_one = |item: &WorkItem| -> Result<RunOutcome> {
        // Streams inside a run are derived from (sequence index, seed) so
        // scheduling order never matters.
        let run_seed = rng::derive(item.seed, item.planned.seq_id as u64);
        match run_sequence(
            item.algorithm,
            &item.planned.sequence,
            &tasks,
            &run_config,
            run_seed,
        ) {
            Ok(record) => Ok(RunOutcome::Done {
                final_error: final_hardness(&record)?,
                errors: record.errors,
            }),
            Err(Error::Divergence(message)) => Ok(RunOutcome::Diverged { message }),
            Err(other) => Err(other),
        }
    };

    let outcomes: Vec<RunOutcome> = if jobs == 1 {
        items.iter().map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| items.par_iter().map(run_one).collect::<Result<_>>())?
    };

    // Aggregate per (sequence, algorithm) over the surviving seeds.
    let mut per_seed = Vec::new();
    let mut diverged = Vec::new();
    let mut grouped: BTreeMap<(usize, Algorithm), Vec<&Vec<Vec<f64>>>> = BTreeMap::new();
    let mut matrices: Vec<Option<Vec<Vec<f64>>>> = Vec::with_capacity(outcomes.len());
    for (item, outcome) in items.iter().zip(outcomes.into_iter()) {
        match outcome {
            RunOutcome::Done { final_error, errors } => {
                per_seed.push(SeedOutcome {
                    seq_id: item.planned.seq_id,
                    algorithm: item.algorithm.to_string(),
                    seed: item.seed,
                    final_error,
                });
                matrices.push(Some(errors));
            }
            RunOutcome::Diverged { message } => {
                diverged.push(DivergedRun {
                    seq_id: item.planned.seq_id,
                    algorithm: item.algorithm.to_string(),
                    seed: item.seed,
                    message,
                });
                matrices.push(None);
            }
        }
    }
    for (item, matrix) in items.iter().zip(&matrices) {
        if let Some(errors) = matrix {
            grouped
                .entry((item.planned.seq_id, item.algorithm))
                .or_default()
                .push(errors);
        }
    }

    let mut rows = Vec::new();
    for planned_seq in &planned {
        let c_total = total_complexity(&planned_seq.sequence, &embeddings)?;
        let f_het = sequential_heterogeneity(&planned_seq.sequence, &embeddings)?;
        for &algorithm in &algorithms {
            let Some(group) = grouped.get(&(planned_seq.seq_id, algorithm)) else {
                continue; // every seed diverged
            };
            let k = planned_seq.sequence.len();
            let mut mean = (0..k).map(|i| vec![0.0f64; i + 1]).collect::<Vec<_>>();
            for errors in group {
                for (i, row) in errors.iter().enumerate() {
                    for (j, &e) in row.iter().enumerate() {
                        mean[i][j] += e;
                    }
                }
            }
            let n = group.len() as f64;
            for row in &mut mean {
                for e in row.iter_mut() {
                    *e /= n;
                }
            }
            let final_error = mean[k - 1].iter().sum::<f64>() / k as f64;
            rows.push(ResultRow {
                seq_id: planned_seq.seq_id,
                algorithm,
                setting: ws.config.setting.clone(),
                sequence: planned_seq.sequence.clone(),
                total_complexity: c_total,
                seq_heterogeneity: f_het,
                plan: planned_seq.plan,
                final_error,
                errors: mean,
            });
        }
    }
    rows.sort_by(|a, b| (a.seq_id, a.algorithm).cmp(&(b.seq_id, b.algorithm)));

    Ok(ExperimentOutput {
        rows,
        per_seed,
        diverged,
        planned_runs,
        probe_id: probe.id.clone(),
    })
}
