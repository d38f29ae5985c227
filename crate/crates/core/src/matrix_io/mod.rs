//! Loading, validating and normalizing design matrices.

mod design;
mod formats;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::Loss;

pub use design::{normalize_columns, ColumnScales, DesignMatrix, Labels};
pub use formats::{parse_dense_csv, parse_matrix_market, parse_svmlight, write_svmlight};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no samples")]
    NoSamples,
    #[error("parse error{}: {msg}", fmt_line(*.line))]
    Parse { line: Option<usize>, msg: String },
    #[error("index out of range{}: {what}", fmt_line(*.line))]
    Bounds { line: Option<usize>, what: String },
    #[error("duplicate entry at row {row}, column {col}")]
    Duplicate { row: usize, col: usize },
    #[error("label {label} of sample {sample} is outside the {loss} domain")]
    Domain { sample: usize, label: f64, loss: Loss },
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" on line {l}")).unwrap_or_default()
}

/// On-disk layout of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Format {
    Svmlight { num_features: Option<usize> },
    MatrixMarket { labels: PathBuf },
    DenseCsv,
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an un-normalized matrix and its labels.
pub fn load_dataset(path: &Path, format: &Format) -> Result<(DesignMatrix, Labels), DataError> {
    let text = read(path)?;
    match format {
        Format::Svmlight { num_features } => parse_svmlight(&text, *num_features),
        Format::MatrixMarket { labels } => parse_matrix_market(&text, &read(labels)?),
        Format::DenseCsv => parse_dense_csv(&text),
    }
}

/// A normalized dataset ready for the solvers.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: DesignMatrix,
    pub labels: Labels,
    pub scales: ColumnScales,
}

/// Loads, validates labels for `loss`, and normalizes columns.
pub fn load_normalized(path: &Path, format: &Format, loss: Loss) -> Result<Dataset, DataError> {
    let (raw, labels) = load_dataset(path, format)?;
    labels.validate_for(loss)?;
    let (matrix, scales) = normalize_columns(&raw);
    Ok(Dataset {
        matrix,
        labels,
        scales,
    })
}
