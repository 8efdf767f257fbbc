//! Experiment orchestration and reporting around the `forgetlab` library:
//! config parsing, the probe/embed/run pipeline, CSV results, correlation
//! tables, and scatter plots.

pub mod config;
pub mod orchestrate;
pub mod report;
pub mod results;
pub mod svg;

pub use config::{load_config, ExperimentConfig, PlanConfig};
pub use orchestrate::{orchestrate_experiment, ExperimentOutput, RunManifest, Workspace};
pub use report::{correlation_tables, report_tables, TableLine};
pub use results::{read_results_csv, write_results_csv, PlanKind, ResultRow};
pub use svg::{render_scatter_svg, Property};
