//! Cross-repetition aggregation: median and interquartile range of F1 per
//! snapshot ordinal.

use std::path::Path;

use crate::experiment::MetricsRow;

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub snapshot: usize,
    pub repetitions: usize,
    pub median_evaluations: f64,
    pub f1_median: f64,
    pub f1_q1: f64,
    pub f1_q3: f64,
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let idx = pos.floor() as usize;
    let frac = pos - idx as f64;
    if idx + 1 < v.len() {
        v[idx] * (1.0 - frac) + v[idx + 1] * frac
    } else {
        v[idx]
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Aggregates per-repetition snapshot rows by snapshot ordinal. Repetitions
/// can end at different step counts, so each ordinal reports how many
/// repetitions reached it.
pub fn summarize(rows_per_rep: &[Vec<MetricsRow>]) -> Vec<SummaryRow> {
    let max_len = rows_per_rep.iter().map(Vec::len).max().unwrap_or(0);
    (0..max_len)
        .map(|i| {
            let f1: Vec<f64> =
                rows_per_rep.iter().filter_map(|rows| rows.get(i)).map(|r| r.f1).collect();
            let evals: Vec<f64> = rows_per_rep
                .iter()
                .filter_map(|rows| rows.get(i))
                .map(|r| r.evaluations as f64)
                .collect();
            SummaryRow {
                snapshot: i,
                repetitions: f1.len(),
                median_evaluations: median(&evals),
                f1_median: median(&f1),
                f1_q1: quantile(&f1, 0.25),
                f1_q3: quantile(&f1, 0.75),
            }
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> std::io::Result<()> {
    let mut text = String::from(
        "# schema=lse-summary-v1 (quantiles: linear interpolation)\n\
         snapshot,repetitions,median_evaluations,f1_median,f1_q1,f1_q3\n",
    );
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.snapshot,
            row.repetitions,
            row.median_evaluations,
            row.f1_median,
            row.f1_q1,
            row.f1_q3
        ));
    }
    std::fs::write(path, text)
}
