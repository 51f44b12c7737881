//! Segmentation evaluation: boundary RMSE, fluid Dice, paired deltas against
//! a no-augmentation baseline, significance and metric-binned breakdowns.
//!
//! Sign convention follows the usual reading of the plots: a negative RMSE
//! delta and a positive Dice delta both mean the augmented run did better.

mod bins;
mod delta;
mod wilcoxon;

pub use bins::{bin_by_metric, bin_values, BinSummary, BinnedDeltas, DEFAULT_BINS};
pub use delta::{delta_table, ColumnSummary, DeltaRow, DeltaTable, ResultRow, ResultTable};
pub use wilcoxon::{
    wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank, PValueMethod, WilcoxonResult, EXACT_MAX_N, MIN_NONZERO,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{is_valid_height, BoundarySet, FluidClass, FluidMask, MAX_LABEL};
use crate::sample::Sample;

/// Per-surface RMSE in pixels over columns valid in both sets.
/// `None` for a surface with no such column.
pub fn boundary_rmse(pred: &BoundarySet, truth: &BoundarySet) -> Result<Vec<Option<f64>>> {
    if pred.width() != truth.width() || pred.num_surfaces() != truth.num_surfaces() {
        return Err(Error::Input(format!(
            "boundary shapes differ: {}x{} vs {}x{}",
            pred.num_surfaces(),
            pred.width(),
            truth.num_surfaces(),
            truth.width()
        )));
    }
    Ok(pred
        .surfaces()
        .iter()
        .zip(truth.surfaces())
        .map(|(p, t)| {
            let (sum, n) = p
                .iter()
                .zip(t)
                .filter(|(a, b)| is_valid_height(**a) && is_valid_height(**b))
                .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).powi(2), n + 1));
            (n > 0).then(|| (sum / n as f64).sqrt())
        })
        .collect())
}

/// `2|P ∩ T| / (|P| + |T|)` for one label; 1.0 when the class is absent from both.
pub fn dice_score(pred: &FluidMask, truth: &FluidMask, class: u8) -> Result<f64> {
    if class > MAX_LABEL {
        return Err(Error::param("class", format!("unknown class id {class}")));
    }
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(Error::Input("mask shapes differ".into()));
    }
    let (mut inter, mut p, mut t) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.labels().iter().zip(truth.labels()) {
        let (ia, ib) = (a == class, b == class);
        p += ia as usize;
        t += ib as usize;
        inter += (ia && ib) as usize;
    }
    if p + t == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + t) as f64)
}

/// Scores of one predicted sample against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub rmse: Vec<Option<f64>>,
    /// IRF, SRF, PED Dice; `None` when either side has no mask.
    pub dice: Option<[f64; 3]>,
}

impl EvalRow {
    /// Converts RMSE from pixels to physical units.
    pub fn with_rmse_scale(mut self, scale: f64) -> Self {
        for v in self.rmse.iter_mut().flatten() {
            *v *= scale;
        }
        self
    }
}

pub fn evaluate_pair(pred: &Sample, truth: &Sample) -> Result<EvalRow> {
    let rmse = match (&pred.boundaries, &truth.boundaries) {
        (Some(p), Some(t)) => boundary_rmse(p, t)?,
        _ => Vec::new(),
    };
    let dice = match (&pred.mask, &truth.mask) {
        (Some(p), Some(t)) => {
            let mut d = [0.0; 3];
            for (slot, class) in d.iter_mut().zip(FluidClass::FLUIDS) {
                *slot = dice_score(p, t, class as u8)?;
            }
            Some(d)
        }
        _ => None,
    };
    Ok(EvalRow {
        id: truth.id.clone(),
        rmse,
        dice,
    })
}

/// Flattens eval rows into a result table with `rmse_s1..`, `dice_irf`, `dice_srf`, `dice_ped`.
pub fn eval_rows_to_table(rows: &[EvalRow]) -> ResultTable {
    let surfaces = rows.iter().map(|r| r.rmse.len()).max().unwrap_or(0);
    let with_dice = rows.iter().any(|r| r.dice.is_some());
    let mut columns: Vec<String> = (1..=surfaces).map(|i| format!("rmse_s{i}")).collect();
    if with_dice {
        columns.extend(FluidClass::FLUIDS.iter().map(|c| format!("dice_{}", c.name())));
    }
    let rows = rows
        .iter()
        .map(|r| {
            let mut values: Vec<Option<f64>> = (0..surfaces).map(|i| r.rmse.get(i).copied().flatten()).collect();
            if with_dice {
                match r.dice {
                    Some(d) => values.extend(d.iter().map(|v| Some(*v))),
                    None => values.extend([None; 3]),
                }
            }
            ResultRow {
                id: r.id.clone(),
                values,
            }
        })
        .collect();
    ResultTable { columns, rows }
}
