use thiserror::Error;

use crate::matrix_io::DataError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("matrix has no columns")]
    EmptyMatrix,
    #[error("{0}")]
    Unsupported(String),
    #[error("reference solve did not converge: {0}")]
    Reference(String),
    #[error("every learning rate diverged")]
    AllRatesDiverged,
}
