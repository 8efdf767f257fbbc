//! Datasets, binary unit tasks, and task sequences.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Feature vectors with integer labels in `[0, label_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    pub inputs: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    pub label_count: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(inputs: Vec<Vec<T>>, labels: Vec<usize>, label_count: usize) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::Data(format!(
                "dataset needs equal, non-zero counts: {} inputs, {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let width = inputs[0].len();
        if inputs.iter().any(|row| row.len() != width) {
            return Err(Error::Data("ragged input rows".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= label_count) {
            return Err(Error::Data(format!(
                "label {bad} outside [0, {label_count})"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            label_count,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs[0].len()
    }

    /// Number of examples carrying the given label.
    pub fn count_label(&self, label: usize) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }
}

/// A binary classification task over one unordered label pair, stored in
/// canonical order `label_a < label_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitTask {
    label_a: usize,
    label_b: usize,
}

impl UnitTask {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::Data(format!("unit task needs two distinct labels, got {a}/{b}")));
        }
        Ok(Self {
            label_a: a.min(b),
            label_b: a.max(b),
        })
    }

    pub fn label_a(&self) -> usize {
        self.label_a
    }

    pub fn label_b(&self) -> usize {
        self.label_b
    }

    /// Canonical `"a/b"` notation used in configs, outputs, and head ids.
    pub fn notation(&self) -> String {
        format!("{}/{}", self.label_a, self.label_b)
    }
}

impl fmt::Display for UnitTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.label_a, self.label_b)
    }
}

impl FromStr for UnitTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| Error::Data(format!("task notation must be 'a/b', got '{s}'")))?;
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad label in task '{s}'")))?;
        let b: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad label in task '{s}'")))?;
        if a >= b {
            return Err(Error::Data(format!(
                "task notation requires a < b, got '{s}'"
            )));
        }
        UnitTask::new(a, b)
    }
}

/// An ordered list of pairwise-distinct unit tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSequence {
    tasks: Vec<UnitTask>,
}

impl TaskSequence {
    pub fn new(tasks: Vec<UnitTask>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Data("task sequence must not be empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &tasks {
            if !seen.insert(*t) {
                return Err(Error::Data(format!("duplicate task {t} in sequence")));
            }
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[UnitTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// `"a/b|c/d|..."` notation.
    pub fn notation(&self) -> String {
        self.tasks
            .iter()
            .map(UnitTask::notation)
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse(s: &str) -> Result<Self> {
        let tasks = s
            .split('|')
            .map(UnitTask::from_str)
            .collect::<Result<Vec<_>>>()?;
        TaskSequence::new(tasks)
    }
}

/// A materialized unit task: binary train/test splits plus its origin pair.
#[derive(Debug, Clone)]
pub struct TaskData<T> {
    pub train: LabeledDataset<T>,
    pub test: LabeledDataset<T>,
    pub origin: UnitTask,
}

/// All `L(L-1)/2` unit tasks of a dataset, sorted lexicographically.
pub fn make_unit_tasks<T: Scalar>(dataset: &LabeledDataset<T>) -> Result<Vec<UnitTask>> {
    let labels = dataset.label_count;
    if labels < 2 {
        return Err(Error::Data(format!(
            "need at least two labels to form unit tasks, got {labels}"
        )));
    }
    let mut tasks = Vec::with_capacity(labels * (labels - 1) / 2);
    for a in 0..labels {
        for b in (a + 1)..labels {
            tasks.push(UnitTask::new(a, b)?);
        }
    }
    Ok(tasks)
}

/// Filters a train/test pair down to one unit task, relabeling
/// `label_a -> 0` and `label_b -> 1`.
///
/// With `cap_per_label`, each training label is uniformly subsampled to the
/// cap (when more examples are available), deterministically under the seed.
/// Test data is never capped.
pub fn materialize_task<T: Scalar>(
    train: &LabeledDataset<T>,
    test: &LabeledDataset<T>,
    task: UnitTask,
    cap_per_label: Option<usize>,
    seed: u64,
) -> Result<TaskData<T>> {
    if let Some(cap) = cap_per_label {
        if cap == 0 {
            return Err(Error::Config("cap_per_label must be positive".into()));
        }
    }
    for (name, ds) in [("train", train), ("test", test)] {
        for label in [task.label_a(), task.label_b()] {
            if ds.count_label(label) == 0 {
                return Err(Error::Data(format!(
                    "label {label} of task {task} absent from {name} set"
                )));
            }
        }
    }

    let select = |ds: &LabeledDataset<T>, cap: Option<usize>, rng_id: u64| -> LabeledDataset<T> {
        let mut chosen: Vec<usize> = Vec::new();
        for (pos, label) in [(0usize, task.label_a()), (1, task.label_b())] {
            let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == label).collect();
            if let Some(cap) = cap {
                if idx.len() > cap {
                    let mut rng = rng::stream(seed, rng_id * 2 + pos as u64);
                    idx.shuffle(&mut rng);
                    idx.truncate(cap);
                    idx.sort_unstable();
                }
            }
            chosen.extend(idx);
        }
        chosen.sort_unstable();
        let inputs = chosen.iter().map(|&i| ds.inputs[i].clone()).collect();
        let labels = chosen
            .iter()
            .map(|&i| usize::from(ds.labels[i] == task.label_b()))
            .collect();
        LabeledDataset {
            inputs,
            labels,
            label_count: 2,
        }
    };

    Ok(TaskData {
        train: select(train, cap_per_label, 0),
        test: select(test, None, 1),
        origin: task,
    })
}
