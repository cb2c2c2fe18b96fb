//! Strategy comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evaluate::EvaluationReport;
use crate::prioritize::Strategy;
use crate::rational::to_fixed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub orderings: usize,
    pub apfd: String,
    pub avg_time_steps: String,
    /// Threshold (percentage points, one decimal) to effective set size.
    pub effective_size: Vec<(String, usize)>,
    pub final_kill_pct: String,
}

impl From<&EvaluationReport> for SummaryRow {
    fn from(r: &EvaluationReport) -> Self {
        SummaryRow {
            strategy: r.strategy,
            orderings: r.orderings,
            apfd: to_fixed(&r.apfd, 6),
            avg_time_steps: to_fixed(&r.avg_time_steps, 6),
            effective_size: r
                .effective_size
                .iter()
                .map(|(t, m)| (to_fixed(t, 1), *m))
                .collect(),
            final_kill_pct: to_fixed(&r.final_kill_pct(), 1),
        }
    }
}

pub fn summary_rows(reports: &[EvaluationReport]) -> Vec<SummaryRow> {
    reports.iter().map(SummaryRow::from).collect()
}

/// Plain-text table, one row per report.
pub fn comparison_table(reports: &[EvaluationReport]) -> String {
    let rows = summary_rows(reports);
    let thresholds: Vec<String> = rows
        .first()
        .map(|r| r.effective_size.iter().map(|(t, _)| t.clone()).collect())
        .unwrap_or_default();

    let mut header = vec![
        "strategy".to_string(),
        "APFD".to_string(),
        "avg_time_steps".to_string(),
    ];
    header.extend(thresholds.iter().map(|t| format!("effective_size@{t}%")));
    header.push("final_kill_pct".to_string());

    let mut table = vec![header];
    for r in &rows {
        let name = if r.orderings > 1 {
            format!("{} (mean of {})", r.strategy, r.orderings)
        } else {
            r.strategy.to_string()
        };
        let mut line = vec![name, r.apfd.clone(), r.avg_time_steps.clone()];
        line.extend(r.effective_size.iter().map(|(_, m)| m.to_string()));
        line.push(r.final_kill_pct.clone());
        table.push(line);
    }

    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, w))| {
                if i == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn report(strategy: Strategy, orderings: usize) -> EvaluationReport {
        EvaluationReport {
            strategy,
            sequence: None,
            orderings,
            curve: vec![ratio(200, 3), int(100)],
            effective_size: vec![(int(5), 2), (ratio(5, 2), 2)],
            apfd: ratio(3, 4),
            avg_time_steps: ratio(21, 2),
            killable_count: 3,
            mr_count: 2,
        }
    }

    #[test]
    fn one_row() {
        let t = comparison_table(&[report(Strategy::Centrality, 1)]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.lines().next().unwrap().contains("effective_size@2.5%"));
        assert!(t.contains("0.750000"));
        assert!(t.contains("10.500000"));
    }

    #[test]
    fn baseline_row_is_labelled() {
        let t = comparison_table(&[report(Strategy::Centrality, 1), report(Strategy::Random, 100)]);
        assert!(t.contains("random (mean of 100)"));
    }
}
