//! Dataset ingestion, synthetic generators and plot summaries.

mod ingest;
mod summary;
mod synth;

pub use ingest::{load_csv, read_csv, LoadedColumn};
pub use summary::{summarize, DatasetSummary, Histogram, Kde};
pub use synth::{quiz_standin, synth_generate, Shape};

use thiserror::Error;

use crate::cfkm::CfkmError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {column:?} not found (available: {available})")]
    MissingColumn { column: String, available: String },
    #[error("column {column:?} has no numeric values after cleaning ({dropped} rows dropped)")]
    Empty { column: String, dropped: usize },
    #[error("row {row}: value {value} lies outside the bounds [{lower}, {upper}]")]
    OutOfBounds { row: usize, value: f64, lower: f64, upper: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Sample(#[from] CfkmError),
}
