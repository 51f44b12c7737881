use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{is_valid_height, BoundarySet, INVALID};

/// Reads one surface per CSV row; a blank cell is [`INVALID`].
///
/// With `expected_width` set, every row must have exactly that many cells.
/// Crossing surfaces are an error unless `auto_sort` is set, in which case
/// each column is sorted top to bottom.
pub fn load_boundaries(path: impl AsRef<Path>, expected_width: Option<usize>, auto_sort: bool) -> Result<BoundarySet> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut surfaces: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Ok(INVALID);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::parse(path, format!("row {}, column {}: `{cell}` is not a finite number", r + 1, c + 1))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        surfaces.push(row);
    }
    if surfaces.is_empty() {
        return Err(Error::parse(path, "no surfaces"));
    }
    let width = expected_width.unwrap_or(surfaces[0].len());
    if let Some((r, s)) = surfaces.iter().enumerate().find(|(_, s)| s.len() != width) {
        return Err(Error::parse(path, format!("row {} has {} columns, expected {width}", r + 1, s.len())));
    }
    let mut set = BoundarySet::new(width, surfaces)?;
    if let Some(col) = set.first_order_violation() {
        if !auto_sort {
            return Err(Error::Input(format!("{}: surfaces cross at column {col}", path.display())));
        }
        log::warn!("{}: surfaces cross at column {col}; sorting columns", path.display());
        set.sort_columns();
    }
    Ok(set)
}

/// Writes one surface per row with full precision; [`INVALID`] becomes a blank cell.
pub fn write_boundaries(set: &BoundarySet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for s in set.surfaces() {
        let cells: Vec<String> = s
            .iter()
            .map(|&h| if is_valid_height(h) { h.to_string() } else { String::new() })
            .collect();
        w.write_record(&cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path, e.to_string())
    }
}
