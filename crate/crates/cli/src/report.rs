//! Correlation tables between final error and the sequence properties.
//!
//! One line per (setting, algorithm) with three cells: (a) error against
//! total complexity, (b) against sequential heterogeneity, and (c) against
//! normalized sequential heterogeneity, the latter computed only over
//! permutation-plan rows where the task set is fixed. Cells print as
//! `0.86 (p<0.01)` and significant cells (p < 0.05) carry a `*`.

use std::collections::BTreeMap;

use forgetlab::algos::Algorithm;
use forgetlab::stats::{correlate, CorrelationResult, PairedSample};
use forgetlab::Result;

use crate::orchestrate::SeedOutcome;
use crate::results::ResultRow;

/// The three correlation cells of one (setting, algorithm) line.
#[derive(Debug, Clone, PartialEq)]
pub struct TableLine {
    pub setting: String,
    pub algorithm: Algorithm,
    pub total_complexity: Option<CorrelationResult>,
    pub heterogeneity: Option<CorrelationResult>,
    pub normalized_heterogeneity: Option<CorrelationResult>,
}

fn correlation_of(pairs: &[(f64, f64)]) -> Option<CorrelationResult> {
    if pairs.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let sample = PairedSample::new(xs, ys).ok()?;
    correlate(&sample).ok()
}

/// Computes the table lines. With `per_seed` observations, each (sequence,
/// algorithm, seed) run is one data point; otherwise the seed-averaged rows
/// are used directly.
pub fn correlation_tables(
    rows: &[ResultRow],
    per_seed: Option<&[SeedOutcome]>,
) -> Result<Vec<TableLine>> {
    // Group rows by (setting, algorithm).
    let mut groups: BTreeMap<(String, Algorithm), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.setting.clone(), row.algorithm))
            .or_default()
            .push(row);
    }

    let mut lines = Vec::new();
    for ((setting, algorithm), group) in groups {
        // Per-seed mode expands each row into its per-seed final errors.
        let observations = |perm: bool, x_of: &dyn Fn(&ResultRow) -> f64| -> Vec<(f64, f64)> {
            let selected = group.iter().filter(|r| r.plan.is_permutation() == perm);
            match per_seed {
                None => selected.map(|r| (x_of(r), r.final_error)).collect(),
                Some(outcomes) => {
                    let by_seq: BTreeMap<usize, f64> =
                        selected.map(|r| (r.seq_id, x_of(r))).collect();
                    outcomes
                        .iter()
                        .filter(|o| o.algorithm == algorithm.to_string())
                        .filter_map(|o| by_seq.get(&o.seq_id).map(|&x| (x, o.final_error)))
                        .collect()
                }
            }
        };

        lines.push(TableLine {
            setting,
            algorithm,
            total_complexity: correlation_of(&observations(false, &|r| r.total_complexity)),
            heterogeneity: correlation_of(&observations(false, &|r| r.seq_heterogeneity)),
            normalized_heterogeneity: correlation_of(&observations(true, &|r| r.seq_heterogeneity)),
        });
    }
    Ok(lines)
}

/// `0.86 (p<0.01)*`-style cell text.
pub fn format_cell(cell: &Option<CorrelationResult>) -> String {
    match cell {
        None => "n/a".to_string(),
        Some(c) => {
            let p_text = if c.p < 0.01 {
                "p<0.01".to_string()
            } else if c.p < 0.05 {
                "p<0.05".to_string()
            } else {
                format!("p={:.2}", c.p)
            };
            let mark = if c.p < 0.05 { "*" } else { "" };
            format!("{:.2} ({p_text}){mark}", c.r)
        }
    }
}

/// Renders the full text report.
pub fn report_tables(rows: &[ResultRow], per_seed: Option<&[SeedOutcome]>) -> Result<String> {
    let lines = correlation_tables(rows, per_seed)?;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<12} {:<22} {:<22} {:<22}\n",
        "setting", "algorithm", "(a) total complexity", "(b) seq heterogeneity", "(c) norm heterogeneity"
    ));
    out.push_str(&"-".repeat(94));
    out.push('\n');
    for line in &lines {
        out.push_str(&format!(
            "{:<14} {:<12} {:<22} {:<22} {:<22}\n",
            line.setting,
            line.algorithm.to_string(),
            format_cell(&line.total_complexity),
            format_cell(&line.heterogeneity),
            format_cell(&line.normalized_heterogeneity),
        ));
    }
    out.push_str("\n* statistically significant (p < 0.05); (c) uses permutation-plan rows only\n");
    Ok(out)
}
