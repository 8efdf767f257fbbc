//! Measuring how task-sequence properties relate to catastrophic forgetting.
//!
//! The crate provides the building blocks for a small continual-learning
//! testbed:
//!
//! - [`nn`] — dense multi-head networks, softmax cross-entropy with
//!   hand-derived backpropagation, and the Adam optimizer.
//! - [`data`] — IDX dataset ingestion, binary unit tasks over label pairs,
//!   and task-sequence sampling (random draws, permutations, greedy extremes).
//! - [`algos`] — sequential training with synaptic intelligence (SI),
//!   variational continual learning (VCL), and coreset VCL, producing
//!   per-task error matrices and the final-hardness measure.
//! - [`embed`] — Fisher-information task embeddings from a trained probe
//!   network, plus the derived sequence measures (task complexity, total
//!   complexity, sequential heterogeneity).
//! - [`stats`] — Pearson correlation with two-sided significance and linear
//!   regression with confidence bands.
//!
//! All numeric code is generic over the [`Scalar`] floating-point type;
//! the type aliases below fix the default `f64` instantiation used by the
//! experiment runner.

pub mod algos;
pub mod data;
pub mod embed;
pub mod error;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision multi-head network.
pub type Net = nn::MultiHeadNet<f64>;
/// Default-precision optimizer settings.
pub type AdamConfig = nn::OptimizerConfig<f64>;
/// Default-precision labeled dataset.
pub type Dataset = data::LabeledDataset<f64>;
/// Default-precision materialized binary task.
pub type Task = data::TaskData<f64>;
/// Default-precision task embedding.
pub type Embedding = embed::TaskEmbedding<f64>;
/// Default-precision embedding collection (unit tasks + trivial task).
pub type Embeddings = embed::EmbeddingSet<f64>;
/// Default-precision probe network.
pub type Probe = embed::ProbeNetwork<f64>;
/// Default-precision run configuration.
pub type RunConfig = algos::RunConfig<f64>;
/// Default-precision paired sample for correlation analysis.
pub type Sample = stats::PairedSample<f64>;

/// Single-precision counterparts for memory-constrained experiments.
pub type Net32 = nn::MultiHeadNet<f32>;
pub type Dataset32 = data::LabeledDataset<f32>;
