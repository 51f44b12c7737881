use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::boundaries::csv_err;
use super::SCHEMA_VERSION;
use crate::characterize::CharacterizationReport;
use crate::error::{Error, Result};
use crate::evaluate::{BinnedDeltas, DeltaTable, ResultRow, ResultTable};

pub const SIGNIFICANT_DIGITS: usize = 6;
pub const REPORT_COLUMNS: [&str; 5] = ["id", "alignment", "symmetry", "contrast", "snr_db"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Input(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// Rounds to `digits` significant digits.
pub fn round_significant(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Text(String),
    Num(Option<f64>),
}

impl Cell {
    fn num(v: f64) -> Cell {
        Cell::Num(v.is_finite().then_some(v))
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(Some(v)) => round_significant(*v, SIGNIFICANT_DIGITS).to_string(),
            Cell::Num(None) => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Num(Some(v)) => Number::from_f64(round_significant(*v, SIGNIFICANT_DIGITS)).map_or(Value::Null, Value::Number),
            Cell::Num(None) => Value::Null,
        }
    }
}

struct Table {
    kind: &'static str,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

fn write_table(t: &Table, path: &Path, fmt: ReportFormat) -> Result<()> {
    if t.rows.is_empty() {
        return Err(Error::Input(format!("refusing to write an empty {} table", t.kind)));
    }
    match fmt {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
            w.write_record(&t.columns).map_err(|e| csv_err(path, e))?;
            for r in &t.rows {
                w.write_record(r.iter().map(Cell::csv)).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        ReportFormat::Json => {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
                .collect();
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "kind": t.kind,
                "columns": t.columns,
                "rows": rows,
            });
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
        }
    }
}

/// Rows as strings keyed by column, `None` for blank/null cells.
struct RawTable {
    columns: Vec<String>,
    rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    fn index(&self, path: &Path, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::parse(path, format!("missing column `{name}`")))
    }
}

fn read_table(path: &Path) -> Result<RawTable> {
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
            let columns: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(|e| csv_err(path, e))?;
                rows.push(rec.iter().map(|c| (!c.trim().is_empty()).then(|| c.trim().to_string())).collect());
            }
            Ok(RawTable { columns, rows })
        }
        ReportFormat::Json => {
            #[derive(Deserialize)]
            struct Doc {
                columns: Vec<String>,
                rows: Vec<BTreeMap<String, Value>>,
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let doc: Doc = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
            let rows = doc
                .rows
                .iter()
                .map(|r| {
                    doc.columns
                        .iter()
                        .map(|c| match r.get(c) {
                            None | Some(Value::Null) => None,
                            Some(Value::String(s)) => Some(s.clone()),
                            Some(v) => Some(v.to_string()),
                        })
                        .collect()
                })
                .collect();
            Ok(RawTable {
                columns: doc.columns,
                rows,
            })
        }
    }
}

fn parse_num(path: &Path, row: usize, cell: &Option<String>) -> Result<Option<f64>> {
    cell.as_deref()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, format!("row {}: `{s}` is not a number", row + 1)))
        })
        .transpose()
}

pub fn write_reports(reports: &[CharacterizationReport], path: impl AsRef<Path>, fmt: ReportFormat) -> Result<()> {
    let t = Table {
        kind: "characterization",
        columns: REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.id.clone()),
                    Cell::num(r.alignment),
                    Cell::num(r.symmetry),
                    Cell::num(r.contrast),
                    Cell::num(r.snr_db),
                ]
            })
            .collect(),
    };
    write_table(&t, path.as_ref(), fmt)
}

/// Reads a characterization table; blank cells read as NaN.
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<CharacterizationReport>> {
    let path = path.as_ref();
    let t = read_table(path)?;
    let idx: Vec<usize> = REPORT_COLUMNS.iter().map(|c| t.index(path, c)).collect::<Result<_>>()?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r[idx[0]].clone().ok_or_else(|| Error::parse(path, format!("row {}: empty id", i + 1)))?;
            let v = |k: usize| -> Result<f64> { Ok(parse_num(path, i, &r[idx[k]])?.unwrap_or(f64::NAN)) };
            Ok(CharacterizationReport {
                id,
                alignment: v(1)?,
                symmetry: v(2)?,
                contrast: v(3)?,
                snr_db: v(4)?,
            })
        })
        .collect()
}

pub fn write_result_table(table: &ResultTable, path: impl AsRef<Path>, fmt: ReportFormat) -> Result<()> {
    let t = Table {
        kind: "results",
        columns: std::iter::once("id".to_string()).chain(table.columns.iter().cloned()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| {
                std::iter::once(Cell::Text(r.id.clone()))
                    .chain(r.values.iter().map(|v| Cell::Num(v.filter(|x| x.is_finite()))))
                    .collect()
            })
            .collect(),
    };
    write_table(&t, path.as_ref(), fmt)
}

/// Reads a per-sample score table with an `id` column; every other column is numeric.
pub fn read_result_table(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    let t = read_table(path)?;
    let id_col = t.index(path, "id")?;
    let columns: Vec<String> = t.columns.iter().filter(|c| *c != "id").cloned().collect();
    let mut seen = std::collections::HashSet::new();
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r[id_col].clone().ok_or_else(|| Error::parse(path, format!("row {}: empty id", i + 1)))?;
            if !seen.insert(id.clone()) {
                return Err(Error::parse(path, format!("duplicate id `{id}`")));
            }
            let values = r
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != id_col)
                .map(|(_, c)| parse_num(path, i, c))
                .collect::<Result<_>>()?;
            Ok(ResultRow { id, values })
        })
        .collect::<Result<_>>()?;
    Ok(ResultTable { columns, rows })
}

/// Per-sample deltas, one column per compared score.
pub fn write_delta_table(d: &DeltaTable, path: impl AsRef<Path>, fmt: ReportFormat) -> Result<()> {
    let t = Table {
        kind: "deltas",
        columns: std::iter::once("id".to_string()).chain(d.columns.iter().cloned()).collect(),
        rows: d
            .rows
            .iter()
            .map(|r| {
                std::iter::once(Cell::Text(r.id.clone()))
                    .chain(r.deltas.iter().map(|v| Cell::Num(*v)))
                    .collect()
            })
            .collect(),
    };
    write_table(&t, path.as_ref(), fmt)
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "column", "n", "mean_delta", "median_delta", "w_plus", "w_minus", "statistic", "p_value", "method",
];

/// One row per compared score: mean and median delta plus the signed-rank test.
pub fn write_delta_summary(d: &DeltaTable, path: impl AsRef<Path>, fmt: ReportFormat) -> Result<()> {
    let t = Table {
        kind: "delta_summary",
        columns: SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: d
            .summaries
            .iter()
            .map(|s| {
                let w = s.wilcoxon.as_ref();
                vec![
                    Cell::Text(s.column.clone()),
                    Cell::Num(Some(s.n as f64)),
                    Cell::Num(s.mean),
                    Cell::Num(s.median),
                    Cell::Num(w.map(|w| w.w_plus)),
                    Cell::Num(w.map(|w| w.w_minus)),
                    Cell::Num(w.map(|w| w.statistic)),
                    Cell::Num(w.map(|w| w.p_value)),
                    Cell::Text(w.map(|w| format!("{:?}", w.method).to_lowercase()).unwrap_or_default()),
                ]
            })
            .collect(),
    };
    write_table(&t, path.as_ref(), fmt)
}

/// Summary rows as written by [`write_delta_summary`]: `(column, mean, median, p_value)`.
pub fn read_delta_summary(path: impl AsRef<Path>) -> Result<Vec<(String, Option<f64>, Option<f64>, Option<f64>)>> {
    let path = path.as_ref();
    let t = read_table(path)?;
    let [c, m, md, p] = ["column", "mean_delta", "median_delta", "p_value"].map(|n| t.index(path, n));
    let (c, m, md, p) = (c?, m?, md?, p?);
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok((
                r[c].clone().unwrap_or_default(),
                parse_num(path, i, &r[m])?,
                parse_num(path, i, &r[md])?,
                parse_num(path, i, &r[p])?,
            ))
        })
        .collect()
}

pub const BIN_COLUMNS: [&str; 9] = [
    "column", "metric", "bin", "lower", "upper", "count", "mean_delta", "median_delta", "degenerate",
];

/// Metric-binned deltas for any number of compared scores.
pub fn write_bins(binned: &[(String, BinnedDeltas)], path: impl AsRef<Path>, fmt: ReportFormat) -> Result<()> {
    let rows = binned
        .iter()
        .flat_map(|(col, b)| {
            b.bins.iter().map(move |bin| {
                vec![
                    Cell::Text(col.clone()),
                    Cell::Text(b.metric.map(|m| m.name().to_string()).unwrap_or_default()),
                    Cell::Num(Some(bin.index as f64)),
                    Cell::num(bin.lower),
                    Cell::num(bin.upper),
                    Cell::Num(Some(bin.count as f64)),
                    Cell::Num(bin.mean_delta),
                    Cell::Num(bin.median_delta),
                    Cell::Text(b.degenerate.to_string()),
                ]
            })
        })
        .collect();
    let t = Table {
        kind: "bins",
        columns: BIN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    };
    write_table(&t, path.as_ref(), fmt)
}
