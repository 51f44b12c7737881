use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
use crate::error::{Error, Result};

/// One row of a per-sample score table; `None` marks an undefined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: String,
    pub values: Vec<Option<f64>>,
}

/// Per-sample scores of one run (e.g. RMSE per surface, Dice per class).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub id: String,
    /// `augmented - baseline` per column.
    pub deltas: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    /// Pairs where both sides are defined.
    pub n: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// `None` when fewer than five nonzero deltas exist.
    pub wilcoxon: Option<WilcoxonResult>,
}

/// Paired comparison of an augmented run against its baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub columns: Vec<String>,
    pub rows: Vec<DeltaRow>,
    pub summaries: Vec<ColumnSummary>,
    /// Ids present in only one of the two runs.
    pub unmatched: Vec<String>,
}

impl DeltaTable {
    /// Defined deltas of one column, in row order.
    pub fn column_deltas(&self, column: usize) -> Vec<(String, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.deltas[column].map(|d| (r.id.clone(), d)))
            .collect()
    }

    pub fn summary(&self, column: &str) -> Option<&ColumnSummary> {
        self.summaries.iter().find(|s| s.column == column)
    }
}

pub(crate) fn mean_median(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    (Some(mean), Some(median))
}

/// Pairs rows by id and computes `augmented - baseline` for every column the
/// two tables share. Rows keep the augmented table's order.
pub fn delta_table(augmented: &ResultTable, baseline: &ResultTable) -> Result<DeltaTable> {
    let shared: Vec<(String, usize, usize)> = augmented
        .columns
        .iter()
        .enumerate()
        .filter_map(|(i, c)| baseline.column_index(c).map(|j| (c.clone(), i, j)))
        .collect();
    if shared.is_empty() {
        return Err(Error::Input("augmented and baseline tables share no columns".into()));
    }
    let base_by_id: HashMap<&str, &super::ResultRow> = baseline.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let aug_ids: std::collections::HashSet<&str> = augmented.rows.iter().map(|r| r.id.as_str()).collect();

    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for a in &augmented.rows {
        let Some(b) = base_by_id.get(a.id.as_str()) else {
            unmatched.push(a.id.clone());
            continue;
        };
        let deltas = shared
            .iter()
            .map(|(_, i, j)| match (a.values.get(*i).copied().flatten(), b.values.get(*j).copied().flatten()) {
                (Some(x), Some(y)) => Some(x - y),
                _ => None,
            })
            .collect();
        rows.push(DeltaRow {
            id: a.id.clone(),
            deltas,
        });
    }
    unmatched.extend(
        baseline
            .rows
            .iter()
            .filter(|r| !aug_ids.contains(r.id.as_str()))
            .map(|r| r.id.clone()),
    );
    if rows.is_empty() {
        return Err(Error::Input("augmented and baseline tables share no sample ids".into()));
    }

    let summaries = shared
        .iter()
        .enumerate()
        .map(|(k, (name, _, _))| {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.deltas[k]).collect();
            let (mean, median) = mean_median(&values);
            ColumnSummary {
                column: name.clone(),
                n: values.len(),
                mean,
                median,
                wilcoxon: wilcoxon_signed_rank(&values).ok(),
            }
        })
        .collect();

    Ok(DeltaTable {
        columns: shared.into_iter().map(|(c, _, _)| c).collect(),
        rows,
        summaries,
        unmatched,
    })
}
