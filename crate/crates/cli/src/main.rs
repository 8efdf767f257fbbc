//! Command-line entry point.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use forgetlab::Error;
use forgetlab_cli::config::{load_config, ExperimentConfig};
use forgetlab_cli::orchestrate::{orchestrate_experiment, RunManifest, SeedOutcome, Workspace};
use forgetlab_cli::report::report_tables;
use forgetlab_cli::results::{read_results_csv, write_results_csv, ResultRow};
use forgetlab_cli::svg::{render_scatter_svg, Property};

#[derive(Parser)]
#[command(
    name = "forgetlab",
    about = "Continual-learning experiments: how task-sequence properties relate to forgetting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's parallel worker count (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Describe the work without training anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ResultsArgs {
    /// Results CSV to analyze (repeatable); defaults to <out_dir>/results.csv.
    #[arg(long)]
    results: Vec<PathBuf>,
    /// Correlate per-seed observations from the run manifest instead of
    /// seed-averaged rows.
    #[arg(long)]
    per_seed: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or load) the probe network and report its id.
    Probe(CommonArgs),
    /// Embed all unit tasks plus the trivial task into the cache.
    Embed(CommonArgs),
    /// Print the planned task sequences.
    Sequences(CommonArgs),
    /// Run the full experiment and write results.csv + manifest.json.
    Run(CommonArgs),
    /// Print the correlation tables for existing results.
    Correlate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        results: ResultsArgs,
    },
    /// Render scatter plots with regression fits and confidence bands.
    Plot {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        results: ResultsArgs,
        /// total_complexity | seq_heterogeneity | norm_seq_heterogeneity
        /// (default: every property with enough rows).
        #[arg(long)]
        x: Option<String>,
    },
    /// Correlation tables plus all scatter plots.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        results: ResultsArgs,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Divergence(_) => 3,
        _ => 2,
    }
}

fn effective_config(common: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut config = load_config(&common.config)?;
    if let Some(dir) = &common.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    Ok(config)
}

fn load_rows(config: &ExperimentConfig, results: &ResultsArgs) -> Result<Vec<ResultRow>, Error> {
    let paths: Vec<PathBuf> = if results.results.is_empty() {
        vec![config.out_dir.join("results.csv")]
    } else {
        results.results.clone()
    };
    let mut rows = Vec::new();
    for path in &paths {
        rows.extend(read_results_csv(path)?);
    }
    Ok(rows)
}

fn load_per_seed(config: &ExperimentConfig) -> Result<Vec<SeedOutcome>, Error> {
    let path = config.out_dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("--per-seed needs {path:?}: {e}")))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("corrupt manifest {path:?}: {e}")))?;
    Ok(manifest.per_seed)
}

fn write_plots(rows: &[ResultRow], config: &ExperimentConfig, only: Option<Property>) -> Result<Vec<PathBuf>, Error> {
    let mut algorithms: Vec<String> = rows.iter().map(|r| r.algorithm.to_string()).collect();
    algorithms.sort();
    algorithms.dedup();

    let properties: Vec<Property> = match only {
        Some(p) => vec![p],
        None => Property::ALL.to_vec(),
    };

    let mut written = Vec::new();
    for algorithm in &algorithms {
        let subset: Vec<ResultRow> = rows
            .iter()
            .filter(|r| r.algorithm.to_string() == *algorithm)
            .cloned()
            .collect();
        for &property in &properties {
            if property.select(&subset).len() < 3 {
                if only.is_some() {
                    return Err(Error::Data(format!(
                        "fewer than 3 rows for {} / {algorithm}",
                        property.label()
                    )));
                }
                continue;
            }
            let setting = &subset[0].setting;
            let path = config
                .out_dir
                .join(format!("scatter_{setting}_{algorithm}_{}.svg", property.label()));
            render_scatter_svg(&subset, property, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Probe(common) => {
            let config = effective_config(&common)?;
            let ws = Workspace::load(config)?;
            if common.dry_run {
                println!("probe id: {}", ws.probe_id());
                println!(
                    "pooled training data: {} examples, width {}",
                    ws.train.len(),
                    ws.train.input_width()
                );
                return Ok(());
            }
            let probe = ws.probe()?;
            println!("probe id: {}", probe.id);
            println!("unit count: {}", probe.unit_count);
            println!("train error: {:.4}", probe.meta.train_error);
            Ok(())
        }
        Command::Embed(common) => {
            let config = effective_config(&common)?;
            let ws = Workspace::load(config)?;
            let tasks = ws.unit_tasks()?;
            if common.dry_run {
                println!("would embed {} unit tasks + trivial", tasks.len());
                return Ok(());
            }
            let probe = ws.probe()?;
            let materialized = ws.materialize_all()?;
            let embeddings = ws.embeddings(&probe, &materialized)?;
            println!(
                "embedded {} unit tasks + trivial (unit count {})",
                embeddings.by_task.len(),
                probe.unit_count
            );
            println!("cache: {}", ws.cache().root().display());
            Ok(())
        }
        Command::Sequences(common) => {
            let config = effective_config(&common)?;
            let ws = Workspace::load(config)?;
            let probe = ws.probe()?;
            let materialized = ws.materialize_all()?;
            let embeddings = ws.embeddings(&probe, &materialized)?;
            for planned in ws.plan(&embeddings)? {
                println!(
                    "{}\t{}\t{}",
                    planned.seq_id,
                    planned.plan.label(),
                    planned.sequence.notation()
                );
            }
            Ok(())
        }
        Command::Run(common) => {
            let config = effective_config(&common)?;
            let ws = Workspace::load(config)?;
            let algorithms = ws.config.parsed_algorithms()?;
            let seeds = ws.seeds(common.seed_offset);
            let setting = ws.config.resolved_setting()?;
            if !setting.desk_feasible {
                eprintln!(
                    "warning: setting '{}' keeps a full-scale schedule and is not practical on a desktop CPU",
                    setting.name
                );
            }
            if common.dry_run {
                let probe = ws.probe()?;
                let materialized = ws.materialize_all()?;
                let embeddings = ws.embeddings(&probe, &materialized)?;
                let planned = ws.plan(&embeddings)?;
                let runs = planned.len() * algorithms.len() * seeds.len();
                println!(
                    "plan: {} sequences x {} algorithms x {} seeds = {} runs",
                    planned.len(),
                    algorithms.len(),
                    seeds.len(),
                    runs
                );
                return Ok(());
            }

            let output = orchestrate_experiment(&ws, ws.config.jobs, common.seed_offset)?;
            let results_path = ws.config.out_dir.join("results.csv");
            write_results_csv(&output.rows, &results_path)?;
            let manifest = RunManifest {
                probe_id: output.probe_id.clone(),
                setting: setting.name.clone(),
                algorithms: algorithms.iter().map(|a| a.to_string()).collect(),
                seeds,
                planned_runs: output.planned_runs,
                emitted_rows: output.rows.len(),
                diverged: output.diverged.clone(),
                per_seed: output.per_seed.clone(),
            };
            let manifest_path = ws.config.out_dir.join("manifest.json");
            fs::write(
                &manifest_path,
                serde_json::to_string_pretty(&manifest)
                    .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?,
            )?;
            println!("wrote {} rows to {}", output.rows.len(), results_path.display());
            println!("manifest: {}", manifest_path.display());

            if !output.diverged.is_empty() {
                let fraction = output.diverged.len() as f64 / output.planned_runs as f64;
                eprintln!(
                    "warning: {} of {} runs diverged and were excluded",
                    output.diverged.len(),
                    output.planned_runs
                );
                if fraction > ws.config.divergence_threshold {
                    return Err(Error::Divergence(format!(
                        "{:.1}% of runs diverged (threshold {:.1}%)",
                        100.0 * fraction,
                        100.0 * ws.config.divergence_threshold
                    )));
                }
            }
            Ok(())
        }
        Command::Correlate { common, results } => {
            let config = effective_config(&common)?;
            let rows = load_rows(&config, &results)?;
            let per_seed = if results.per_seed {
                Some(load_per_seed(&config)?)
            } else {
                None
            };
            if common.dry_run {
                println!("would correlate {} rows", rows.len());
                return Ok(());
            }
            let text = report_tables(&rows, per_seed.as_deref())?;
            print!("{text}");
            let path = config.out_dir.join("correlations.txt");
            fs::create_dir_all(&config.out_dir)?;
            fs::write(&path, &text)?;
            eprintln!("saved to {}", path.display());
            Ok(())
        }
        Command::Plot { common, results, x } => {
            let config = effective_config(&common)?;
            let rows = load_rows(&config, &results)?;
            let property = x.as_deref().map(Property::parse).transpose()?;
            if common.dry_run {
                println!("would plot {} rows", rows.len());
                return Ok(());
            }
            for path in write_plots(&rows, &config, property)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Report { common, results } => {
            let config = effective_config(&common)?;
            let rows = load_rows(&config, &results)?;
            let per_seed = if results.per_seed {
                Some(load_per_seed(&config)?)
            } else {
                None
            };
            if common.dry_run {
                println!("would report on {} rows", rows.len());
                return Ok(());
            }
            let text = report_tables(&rows, per_seed.as_deref())?;
            print!("{text}");
            fs::create_dir_all(&config.out_dir)?;
            fs::write(config.out_dir.join("correlations.txt"), &text)?;
            for path in write_plots(&rows, &config, None)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
