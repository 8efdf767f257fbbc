//! Task-sequence sampling: random draws without replacement, permutations of
//! a fixed task set, and greedy extreme-complexity construction.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::data::dataset::{TaskSequence, UnitTask};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// `n` sequences of `k` distinct tasks drawn uniformly without replacement;
/// order within a sequence is the draw order.
pub fn sample_sequences(
    tasks: &[UnitTask],
    n: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<TaskSequence>> {
    if n == 0 {
        return Err(Error::Config("sequence count must be positive".into()));
    }
    if k == 0 || k > tasks.len() {
        return Err(Error::Config(format!(
            "sequence length {k} outside [1, {}]",
            tasks.len()
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pool: Vec<UnitTask> = tasks.to_vec();
        let mut picked = Vec::with_capacity(k);
        for i in 0..k {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
            picked.push(pool[i]);
        }
        out.push(TaskSequence::new(picked)?);
    }
    Ok(out)
}

fn factorial_saturating(k: usize) -> u64 {
    (1..=k as u64).try_fold(1u64, |acc, i| acc.checked_mul(i)).unwrap_or(u64::MAX)
}

fn all_orderings(sorted: &[UnitTask]) -> Vec<Vec<UnitTask>> {
    if sorted.len() == 1 {
        return vec![sorted.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in sorted.iter().enumerate() {
        let mut rest = sorted.to_vec();
        rest.remove(i);
        for mut tail in all_orderings(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// `n` distinct orderings of a fixed task set.
///
/// When `n` equals `k!` every ordering is returned exactly once, sorted
/// lexicographically over the canonical task order; otherwise `n` distinct
/// orderings are sampled uniformly.
pub fn sample_permutation_sequences(
    base: &[UnitTask],
    n: usize,
    seed: u64,
) -> Result<Vec<TaskSequence>> {
    let k = base.len();
    if k == 0 {
        return Err(Error::Config("permutation base must not be empty".into()));
    }
    let distinct: BTreeSet<UnitTask> = base.iter().copied().collect();
    if distinct.len() != k {
        return Err(Error::Data("permutation base contains duplicate tasks".into()));
    }
    let total = factorial_saturating(k);
    if n as u64 > total {
        return Err(Error::Config(format!(
            "cannot draw {n} distinct orderings of {k} tasks (only {total} exist)"
        )));
    }
    if n == 0 {
        return Err(Error::Config("permutation count must be positive".into()));
    }

    let sorted: Vec<UnitTask> = distinct.into_iter().collect();
    if n as u64 == total {
        return all_orderings(&sorted)
            .into_iter()
            .map(TaskSequence::new)
            .collect();
    }

    let mut rng = rng::stream(seed, 0);
    let mut seen: BTreeSet<Vec<UnitTask>> = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut perm = sorted.clone();
        for i in 0..k {
            let j = rng.random_range(i..k);
            perm.swap(i, j);
        }
        if seen.insert(perm.clone()) {
            out.push(TaskSequence::new(perm)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Highest,
    Lowest,
}

/// Builds a sequence starting at `start`, repeatedly appending the remaining
/// task with the highest (or lowest) complexity. Ties go to the
/// lexicographically smaller task.
pub fn greedy_extreme_sequence<T: Scalar>(
    tasks: &[UnitTask],
    complexity: &BTreeMap<UnitTask, T>,
    direction: Direction,
    start: UnitTask,
    k: usize,
) -> Result<TaskSequence> {
    if !tasks.contains(&start) {
        return Err(Error::Data(format!("start task {start} not in task list")));
    }
    if k == 0 || k > tasks.len() {
        return Err(Error::Config(format!(
            "sequence length {k} outside [1, {}]",
            tasks.len()
        )));
    }
    // BTreeSet gives lexicographic iteration, which is the tie-break order.
    let mut remaining: BTreeSet<UnitTask> = tasks.iter().copied().collect();
    remaining.remove(&start);

    let mut picked = vec![start];
    while picked.len() < k {
        let mut best: Option<(UnitTask, T)> = None;
        for &t in &remaining {
            let c = *complexity
                .get(&t)
                .ok_or_else(|| Error::Data(format!("no complexity value for task {t}")))?;
            let better = match (&best, direction) {
                (None, _) => true,
                (Some((_, bc)), Direction::Highest) => c > *bc,
                (Some((_, bc)), Direction::Lowest) => c < *bc,
            };
            if better {
                best = Some((t, c));
            }
        }
        let (t, _) = best.expect("remaining is non-empty while picked.len() < k");
        remaining.remove(&t);
        picked.push(t);
    }
    TaskSequence::new(picked)
}
