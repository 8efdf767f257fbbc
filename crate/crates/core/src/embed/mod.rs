//! Fisher-information task embeddings and the sequence property measures
//! built on them.

mod cache;
mod distance;
mod fisher;
mod probe;

pub use cache::{CacheManifest, EmbeddingCache};
pub use distance::{
    normalized_cos_distance, normalized_cos_distance_values, sequential_heterogeneity,
    task_complexity, total_complexity, EmbeddingSet, TaskEmbedding, TaskKey,
};
pub use fisher::{embed_task, trivial_embedding, EmbedConfig};
pub use probe::{train_probe, ProbeConfig, ProbeMeta, ProbeNetwork};
