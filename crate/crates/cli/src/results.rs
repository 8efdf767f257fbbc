//! Result rows and their CSV serialization.
//!
//! Schema (header order is fixed):
//! `seq_id,algorithm,setting,tasks,total_complexity,seq_heterogeneity,plan,final_error,err_i_j...`
//! where `tasks` is `a/b|c/d|...` and the `err_i_j` columns enumerate the
//! lower-triangular error matrix row-major (`j <= i`). Floats are written
//! with 17 significant digits, which round-trips `f64` exactly.

use std::fs;
use std::path::Path;

use forgetlab::algos::Algorithm;
use forgetlab::data::TaskSequence;
use forgetlab::{Error, Result};

/// Provenance label of a sequence plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Random,
    Permutations,
    Explicit,
    GreedyHigh,
    GreedyLow,
}

impl PlanKind {
    pub fn label(&self) -> &'static str {
        match self {
            PlanKind::Random => "random",
            PlanKind::Permutations => "permutations",
            PlanKind::Explicit => "explicit",
            PlanKind::GreedyHigh => "greedy-high",
            PlanKind::GreedyLow => "greedy-low",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PlanKind::Random),
            "permutations" => Ok(PlanKind::Permutations),
            "explicit" => Ok(PlanKind::Explicit),
            "greedy-high" => Ok(PlanKind::GreedyHigh),
            "greedy-low" => Ok(PlanKind::GreedyLow),
            other => Err(Error::Data(format!("unknown plan label '{other}'"))),
        }
    }

    /// Permutation rows hold the normalized-heterogeneity observations.
    pub fn is_permutation(&self) -> bool {
        matches!(self, PlanKind::Permutations)
    }
}

/// One aggregated observation: a (sequence, algorithm) pair with its
/// property measures and seed-averaged error matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seq_id: usize,
    pub algorithm: Algorithm,
    pub setting: String,
    pub sequence: TaskSequence,
    pub total_complexity: f64,
    pub seq_heterogeneity: f64,
    pub plan: PlanKind,
    /// Mean of the last error-matrix row (equals the seed-mean of per-run
    /// final hardness).
    pub final_error: f64,
    /// Seed-averaged lower-triangular error matrix.
    pub errors: Vec<Vec<f64>>,
}

/// `17` significant digits: lossless decimal text for `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(k: usize) -> String {
    let mut cols = vec![
        "seq_id".to_string(),
        "algorithm".to_string(),
        "setting".to_string(),
        "tasks".to_string(),
        "total_complexity".to_string(),
        "seq_heterogeneity".to_string(),
        "plan".to_string(),
        "final_error".to_string(),
    ];
    for i in 0..k {
        for j in 0..=i {
            cols.push(format!("err_{i}_{j}"));
        }
    }
    cols.join(",")
}

/// Writes rows to CSV. All rows must share one sequence length.
pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Data("no result rows to write".into()));
    }
    let k = rows[0].sequence.len();
    if rows.iter().any(|r| r.sequence.len() != k) {
        return Err(Error::Data("result rows have mixed sequence lengths".into()));
    }

    let mut text = header(k);
    text.push('\n');
    for row in rows {
        let mut fields = vec![
            row.seq_id.to_string(),
            row.algorithm.to_string(),
            row.setting.clone(),
            row.sequence.notation(),
            format_float(row.total_complexity),
            format_float(row.seq_heterogeneity),
            row.plan.label().to_string(),
            format_float(row.final_error),
        ];
        for matrix_row in &row.errors {
            for &e in matrix_row {
                fields.push(format_float(e));
            }
        }
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    if let Some(parent) = path.as_ref().parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path.as_ref(), text)?;
    Ok(())
}

/// Parses a results CSV back into rows (exact round trip of
/// [`write_results_csv`]).
pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read results {path:?}: {e}")))?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Data(format!("empty results file {path:?}")))?;
    let columns: Vec<&str> = head.split(',').collect();
    if columns.len() < 9 || columns[0] != "seq_id" {
        return Err(Error::Data(format!("unrecognized results header in {path:?}")));
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Data(format!(
                "line {} has {} fields, header has {}",
                lineno + 2,
                fields.len(),
                columns.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("bad {what} value '{s}' on line {}", lineno + 2)))
        };
        let sequence = TaskSequence::parse(fields[3])?;
        let k = sequence.len();
        let mut errors = Vec::with_capacity(k);
        let mut cursor = 8;
        for i in 0..k {
            let mut row = Vec::with_capacity(i + 1);
            for _ in 0..=i {
                row.push(parse_f(fields[cursor], "error")?);
                cursor += 1;
            }
            errors.push(row);
        }
        rows.push(ResultRow {
            seq_id: fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad seq_id on line {}", lineno + 2)))?,
            algorithm: fields[1].parse()?,
            setting: fields[2].to_string(),
            sequence,
            total_complexity: parse_f(fields[4], "total_complexity")?,
            seq_heterogeneity: parse_f(fields[5], "seq_heterogeneity")?,
            plan: PlanKind::parse(fields[6])?,
            final_error: parse_f(fields[7], "final_error")?,
            errors,
        });
    }
    Ok(rows)
}
