//! Coreset selection and storage for rehearsal-style evaluation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::data::TaskData;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Examples withheld from one task's training data.
#[derive(Debug, Clone)]
pub struct CoresetSplit<T> {
    pub selected_inputs: Vec<Vec<T>>,
    pub selected_labels: Vec<usize>,
    pub remainder_inputs: Vec<Vec<T>>,
    pub remainder_labels: Vec<usize>,
}

/// Uniformly samples `size` training examples without replacement,
/// deterministically under the seed. The remainder excludes the selection.
pub fn select_coreset<T: Scalar>(
    task: &TaskData<T>,
    size: usize,
    seed: u64,
) -> Result<CoresetSplit<T>> {
    let n = task.train.len();
    if size > n {
        return Err(Error::Config(format!(
            "coreset size {size} exceeds training set size {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng::stream(seed, 0));
    let mut selected: Vec<usize> = indices[..size].to_vec();
    let mut remainder: Vec<usize> = indices[size..].to_vec();
    selected.sort_unstable();
    remainder.sort_unstable();

    let gather = |idx: &[usize]| -> (Vec<Vec<T>>, Vec<usize>) {
        (
            idx.iter().map(|&i| task.train.inputs[i].clone()).collect(),
            idx.iter().map(|&i| task.train.labels[i]).collect(),
        )
    };
    let (selected_inputs, selected_labels) = gather(&selected);
    let (remainder_inputs, remainder_labels) = gather(&remainder);
    Ok(CoresetSplit {
        selected_inputs,
        selected_labels,
        remainder_inputs,
        remainder_labels,
    })
}

/// Stored examples per head, capped at `capacity` per task.
#[derive(Debug, Clone)]
pub struct Coreset<T> {
    pub per_task: BTreeMap<String, (Vec<Vec<T>>, Vec<usize>)>,
    pub capacity: usize,
}

impl<T: Scalar> Coreset<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            per_task: BTreeMap::new(),
            capacity,
        }
    }

    pub fn insert(&mut self, head: &str, inputs: Vec<Vec<T>>, labels: Vec<usize>) -> Result<()> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape("coreset inputs/labels length mismatch".into()));
        }
        if inputs.len() > self.capacity {
            return Err(Error::Config(format!(
                "coreset for '{head}' holds {} examples, capacity is {}",
                inputs.len(),
                self.capacity
            )));
        }
        self.per_task.insert(head.to_string(), (inputs, labels));
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.per_task.values().all(|(i, _)| i.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledDataset, UnitTask};

    fn task(n: usize) -> TaskData<f64> {
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        TaskData {
            train: LabeledDataset::new(inputs.clone(), labels.clone(), 2).unwrap(),
            test: LabeledDataset::new(inputs, labels, 2).unwrap(),
            origin: UnitTask::new(0, 1).unwrap(),
        }
    }

    #[test]
    fn zero_size_keeps_everything_in_the_remainder() {
        let split = select_coreset(&task(10), 0, 1).unwrap();
        assert!(split.selected_inputs.is_empty());
        assert_eq!(split.remainder_inputs.len(), 10);
    }

    #[test]
    fn full_size_selects_everything() {
        let split = select_coreset(&task(6), 6, 1).unwrap();
        assert_eq!(split.selected_inputs.len(), 6);
        assert!(split.remainder_inputs.is_empty());
        assert!(select_coreset(&task(6), 7, 1).is_err());
    }

    #[test]
    fn selection_is_deterministic_and_disjoint() {
        let a = select_coreset(&task(20), 8, 5).unwrap();
        let b = select_coreset(&task(20), 8, 5).unwrap();
        assert_eq!(a.selected_inputs, b.selected_inputs);

        let c = select_coreset(&task(20), 8, 6).unwrap();
        assert_ne!(a.selected_inputs, c.selected_inputs);

        let mut all: Vec<f64> = a
            .selected_inputs
            .iter()
            .chain(&a.remainder_inputs)
            .map(|r| r[0])
            .collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(all, (0..20).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn coreset_capacity_is_enforced() {
        let mut cs = Coreset::<f64>::new(2);
        assert!(cs.insert("0/1", vec![vec![0.0]], vec![0]).is_ok());
        assert!(cs
            .insert("2/3", vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0])
            .is_err());
        assert!(!cs.is_empty());
    }
}
