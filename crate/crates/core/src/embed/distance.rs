//! The normalized cosine distance between task embeddings, and the sequence
//! measures built on it: task complexity, total complexity, and sequential
//! heterogeneity.

use std::collections::BTreeMap;
use std::fmt;

use crate::data::{TaskSequence, UnitTask};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifies what an embedding describes: a unit task or the trivial
/// (constant-label) reference task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaskKey {
    Task(UnitTask),
    Trivial,
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKey::Task(t) => write!(f, "{t}"),
            TaskKey::Trivial => write!(f, "trivial"),
        }
    }
}

impl TaskKey {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "trivial" {
            Ok(TaskKey::Trivial)
        } else {
            Ok(TaskKey::Task(s.parse()?))
        }
    }
}

/// Per-hidden-unit averaged diagonal Fisher information of a probe trunk,
/// computed for one task. Entries are non-negative; length equals the
/// probe's total hidden-unit count.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEmbedding<T> {
    pub values: Vec<T>,
    pub task: TaskKey,
    pub probe_id: String,
}

/// Embeddings for every unit task of a corpus plus the trivial task.
#[derive(Debug, Clone)]
pub struct EmbeddingSet<T> {
    pub by_task: BTreeMap<UnitTask, TaskEmbedding<T>>,
    pub trivial: TaskEmbedding<T>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn get(&self, task: UnitTask) -> Result<&TaskEmbedding<T>> {
        self.by_task
            .get(&task)
            .ok_or_else(|| Error::Data(format!("missing embedding for task {task}")))
    }

    /// Complexity of every embedded task, keyed for greedy construction.
    pub fn complexity_map(&self) -> Result<BTreeMap<UnitTask, T>> {
        self.by_task
            .iter()
            .map(|(&t, e)| Ok((t, task_complexity(e, &self.trivial)?)))
            .collect()
    }
}

/// Coordinates where both embeddings fall below this are dropped before
/// normalization; they carry no Fisher mass and would otherwise divide 0/0.
const DROP_THRESHOLD: f64 = 1e-30;

/// Distance on raw embedding vectors: with `u = a/(a+b)` and `v = b/(a+b)`
/// elementwise, returns `1 - (u.v)/(|u||v|)`. Symmetric, scale-invariant,
/// and in [0, 1] for non-negative inputs.
pub fn normalized_cos_distance_values<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "embedding lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let drop = T::of(DROP_THRESHOLD);
    let mut uu = T::zero();
    let mut vv = T::zero();
    let mut uv = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        if x < drop && y < drop {
            continue;
        }
        let sum = x + y;
        let u = x / sum;
        let v = y / sum;
        uu += u * u;
        vv += v * v;
        uv += u * v;
    }
    if uu == T::zero() || vv == T::zero() {
        return Err(Error::Data(
            "embedding entirely near-zero after coordinate dropping".into(),
        ));
    }
    let cos = uv / (uu.sqrt() * vv.sqrt());
    Ok((T::one() - cos).max(T::zero()).min(T::one()))
}

/// Normalized cosine distance between two embeddings of the same probe.
pub fn normalized_cos_distance<T: Scalar>(
    e1: &TaskEmbedding<T>,
    e2: &TaskEmbedding<T>,
) -> Result<T> {
    normalized_cos_distance_values(&e1.values, &e2.values)
}

/// Task complexity: distance from the task's embedding to the trivial task.
pub fn task_complexity<T: Scalar>(
    e_task: &TaskEmbedding<T>,
    e_trivial: &TaskEmbedding<T>,
) -> Result<T> {
    if e_task.probe_id != e_trivial.probe_id {
        return Err(Error::Data(format!(
            "probe mismatch: '{}' vs '{}'",
            e_task.probe_id, e_trivial.probe_id
        )));
    }
    normalized_cos_distance(e_task, e_trivial)
}

/// Total complexity of a sequence: the sum of its tasks' complexities.
pub fn total_complexity<T: Scalar>(
    sequence: &TaskSequence,
    embeddings: &EmbeddingSet<T>,
) -> Result<T> {
    let mut total = T::zero();
    for &t in sequence.tasks() {
        total += task_complexity(embeddings.get(t)?, &embeddings.trivial)?;
    }
    Ok(total)
}

/// Sequential heterogeneity: the sum of distances between consecutive task
/// pairs. Zero for a singleton sequence.
pub fn sequential_heterogeneity<T: Scalar>(
    sequence: &TaskSequence,
    embeddings: &EmbeddingSet<T>,
) -> Result<T> {
    let tasks = sequence.tasks();
    let mut total = T::zero();
    for pair in tasks.windows(2) {
        total += normalized_cos_distance(embeddings.get(pair[0])?, embeddings.get(pair[1])?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(values: &[f64], task: TaskKey) -> TaskEmbedding<f64> {
        TaskEmbedding {
            values: values.to_vec(),
            task,
            probe_id: "p".into(),
        }
    }

    fn set_from(pairs: &[(UnitTask, Vec<f64>)], trivial: Vec<f64>) -> EmbeddingSet<f64> {
        EmbeddingSet {
            by_task: pairs
                .iter()
                .map(|(t, v)| (*t, emb(v, TaskKey::Task(*t))))
                .collect(),
            trivial: emb(&trivial, TaskKey::Trivial),
        }
    }

    #[test]
    fn identity_distance_is_zero() {
        let e = emb(&[0.3, 1.7, 0.01], TaskKey::Trivial);
        assert!(normalized_cos_distance(&e, &e).unwrap() < 1e-15);
    }

    #[test]
    fn small_example_matches_direct_evaluation() {
        // e1=(1,2), e2=(3,4): u=(1/4,1/3), v=(3/4,2/3).
        let d = normalized_cos_distance_values(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        let (u, v) = ([0.25f64, 1.0 / 3.0], [0.75f64, 2.0 / 3.0]);
        let dot = u[0] * v[0] + u[1] * v[1];
        let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let expected = 1.0 - dot / (nu * nv);
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.02006).abs() < 1e-5, "d = {d}");
    }

    #[test]
    fn scale_invariance_and_symmetry() {
        let a = [0.5, 1.25, 0.0, 3.0];
        let b = [1.0, 0.25, 0.75, 0.5];
        let d = normalized_cos_distance_values(&a, &b).unwrap();
        for c in [1e-6, 0.5, 7.0, 1e9] {
            let ac: Vec<f64> = a.iter().map(|x| x * c).collect();
            let bc: Vec<f64> = b.iter().map(|x| x * c).collect();
            let dc = normalized_cos_distance_values(&ac, &bc).unwrap();
            assert!((d - dc).abs() < 1e-9, "scale {c}: {d} vs {dc}");
        }
        let rev = normalized_cos_distance_values(&b, &a).unwrap();
        assert!((d - rev).abs() < 1e-15);
    }

    #[test]
    fn zero_against_positive_is_an_error_but_shared_zeros_drop() {
        // A coordinate that is zero in both vectors is dropped harmlessly.
        let d = normalized_cos_distance_values(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!(d >= 0.0);
        // An all-zero vector has no direction left after dropping.
        assert!(normalized_cos_distance_values(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(normalized_cos_distance_values(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn probe_mismatch_is_rejected() {
        let a = emb(&[1.0], TaskKey::Trivial);
        let mut b = emb(&[1.0], TaskKey::Trivial);
        b.probe_id = "other".into();
        assert!(task_complexity(&a, &b).is_err());
    }

    #[test]
    fn sequence_measures_on_a_small_corpus() {
        let t01 = UnitTask::new(0, 1).unwrap();
        let t23 = UnitTask::new(2, 3).unwrap();
        let t45 = UnitTask::new(4, 5).unwrap();
        let set = set_from(
            &[
                (t01, vec![1.0, 2.0]),
                (t23, vec![3.0, 4.0]),
                (t45, vec![10.0, 1.0]),
            ],
            vec![1e-4, 1e-4],
        );

        // Singleton: total = task complexity, heterogeneity = 0.
        let single = TaskSequence::new(vec![t01]).unwrap();
        let c = total_complexity(&single, &set).unwrap();
        let expected = task_complexity(set.get(t01).unwrap(), &set.trivial).unwrap();
        assert_eq!(c, expected);
        assert_eq!(sequential_heterogeneity(&single, &set).unwrap(), 0.0);

        // Total complexity is permutation invariant (exact).
        let fwd = TaskSequence::new(vec![t01, t23, t45]).unwrap();
        let swapped = TaskSequence::new(vec![t23, t45, t01]).unwrap();
        assert_eq!(
            total_complexity(&fwd, &set).unwrap(),
            total_complexity(&swapped, &set).unwrap()
        );

        // Heterogeneity is reversal invariant (exact)...
        let rev = TaskSequence::new(vec![t45, t23, t01]).unwrap();
        assert_eq!(
            sequential_heterogeneity(&fwd, &set).unwrap(),
            sequential_heterogeneity(&rev, &set).unwrap()
        );

        // ...but not invariant under general permutations.
        let other = TaskSequence::new(vec![t23, t01, t45]).unwrap();
        let f1 = sequential_heterogeneity(&fwd, &set).unwrap();
        let f2 = sequential_heterogeneity(&other, &set).unwrap();
        assert!((f1 - f2).abs() > 1e-6, "expected a heterogeneity gap, got {f1} vs {f2}");

        // Missing embedding errors out.
        let t67 = UnitTask::new(6, 7).unwrap();
        let missing = TaskSequence::new(vec![t01, t67]).unwrap();
        assert!(total_complexity(&missing, &set).is_err());
        assert!(sequential_heterogeneity(&missing, &set).is_err());
    }

    proptest! {
        #[test]
        fn distance_properties_on_random_nonnegative_vectors(
            pairs in proptest::collection::vec((1e-9f64..10.0, 1e-9f64..10.0), 2..32),
            scale in 1e-3f64..1e3,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let d = normalized_cos_distance_values(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));

            let rev = normalized_cos_distance_values(&b, &a).unwrap();
            prop_assert!((d - rev).abs() < 1e-12);

            let da = normalized_cos_distance_values(&a, &a).unwrap();
            prop_assert!(da < 1e-12);

            let ac: Vec<f64> = a.iter().map(|x| x * scale).collect();
            let bc: Vec<f64> = b.iter().map(|x| x * scale).collect();
            let dc = normalized_cos_distance_values(&ac, &bc).unwrap();
            prop_assert!((d - dc).abs() < 1e-9);
        }
    }
}
