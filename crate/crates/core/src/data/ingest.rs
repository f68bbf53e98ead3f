use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::DataError;
use crate::cfkm::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadedColumn {
    pub samples: SampleSet,
    /// Rows whose cell was empty, non-numeric, NaN or infinite.
    pub dropped: usize,
}

/// Reads one numeric column of a comma-separated file with a header row.
///
/// Bounds default to the observed range of the cleaned values.
pub fn load_csv(path: impl AsRef<Path>, column: &str, bounds: Option<(f64, f64)>) -> Result<LoadedColumn, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    read_csv(file, column, bounds)
}

pub fn read_csv<R: Read>(reader: R, column: &str, bounds: Option<(f64, f64)>) -> Result<LoadedColumn, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = headers.iter().position(|h| h.trim() == column).ok_or_else(|| DataError::MissingColumn {
        column: column.to_string(),
        available: headers.iter().collect::<Vec<_>>().join(", "),
    })?;

    let mut values = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        match record.get(idx).map(str::trim).and_then(|s| s.parse::<f64>().ok()) {
            Some(v) if v.is_finite() => {
                values.push(v);
                rows.push(row + 2);
            }
            _ => dropped += 1,
        }
    }
    if values.is_empty() {
        return Err(DataError::Empty { column: column.to_string(), dropped });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} non-numeric rows from column {column:?}");
    }

    let samples = match bounds {
        Some((lower, upper)) => {
            if !(lower < upper) {
                return Err(DataError::Parameter(format!("bounds [{lower}, {upper}] are empty")));
            }
            if let Some((&value, &row)) = values.iter().zip(&rows).find(|(&v, _)| v < lower || v > upper) {
                return Err(DataError::OutOfBounds { row, value, lower, upper });
            }
            SampleSet::new(values, lower, upper)?
        }
        None => SampleSet::from_data(values)?,
    };
    Ok(LoadedColumn { samples, dropped })
}
