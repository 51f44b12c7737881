use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::delta::mean_median;
use crate::characterize::{CharacterizationReport, Metric};
use crate::error::{Error, Result};

/// Quartiles.
pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_delta: Option<f64>,
    pub median_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDeltas {
    pub metric: Option<Metric>,
    /// `bins + 1` quantile edges, lowest to highest.
    pub edges: Vec<f64>,
    pub bins: Vec<BinSummary>,
    /// Set when the metric was constant and everything fell into one bin.
    pub degenerate: bool,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Partitions `(metric value, delta)` pairs by quantiles of the metric.
///
/// Bin `i` holds values `v` with `edge[i] < v <= edge[i + 1]` (the first bin
/// also takes the minimum), so equal metric values always share a bin.
pub fn bin_values(pairs: &[(f64, f64)], bins: usize) -> Result<BinnedDeltas> {
    if bins < 2 {
        return Err(Error::param("bins", format!("{bins} < 2")));
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no values to bin".into()));
    }
    if pairs.iter().any(|(m, d)| !m.is_finite() || !d.is_finite()) {
        return Err(Error::Input("non-finite metric or delta".into()));
    }
    let mut metric: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    metric.sort_by(f64::total_cmp);
    let (lo, hi) = (metric[0], metric[metric.len() - 1]);
    if lo == hi {
        let deltas: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (mean_delta, median_delta) = mean_median(&deltas);
        return Ok(BinnedDeltas {
            metric: None,
            edges: vec![lo, hi],
            bins: vec![BinSummary {
                index: 0,
                lower: lo,
                upper: hi,
                count: deltas.len(),
                mean_delta,
                median_delta,
            }],
            degenerate: true,
        });
    }
    let edges: Vec<f64> = (0..=bins).map(|k| quantile(&metric, k as f64 / bins as f64)).collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for &(m, d) in pairs {
        let idx = edges[1..bins].iter().filter(|&&e| m > e).count();
        members[idx].push(d);
    }
    let bins = members
        .iter()
        .enumerate()
        .map(|(i, ds)| {
            let (mean_delta, median_delta) = mean_median(ds);
            BinSummary {
                index: i,
                lower: edges[i],
                upper: edges[i + 1],
                count: ds.len(),
                mean_delta,
                median_delta,
            }
        })
        .collect();
    Ok(BinnedDeltas {
        metric: None,
        edges,
        bins,
        degenerate: false,
    })
}

/// Joins per-sample deltas with characterization reports by id and bins them
/// on `metric`. Ids missing from the reports are skipped.
pub fn bin_by_metric(
    deltas: &[(String, f64)],
    reports: &[CharacterizationReport],
    metric: Metric,
    bins: usize,
) -> Result<BinnedDeltas> {
    let by_id: HashMap<&str, &CharacterizationReport> = reports.iter().map(|r| (r.id.as_str(), r)).collect();
    let pairs: Vec<(f64, f64)> = deltas
        .iter()
        .filter_map(|(id, d)| by_id.get(id.as_str()).map(|r| (metric.of(r), *d)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Input("deltas and reports share no sample ids".into()));
    }
    let mut out = bin_values(&pairs, bins)?;
    out.metric = Some(metric);
    Ok(out)
}
