//! Dataset ingestion, unit-task construction, and task-sequence sampling.

mod dataset;
mod idx;
mod sequences;

pub use dataset::{make_unit_tasks, materialize_task, LabeledDataset, TaskData, TaskSequence, UnitTask};
pub use idx::{load_idx, write_idx};
pub use sequences::{
    greedy_extreme_sequence, sample_permutation_sequences, sample_sequences, Direction,
};
