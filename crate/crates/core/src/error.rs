use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: matrix must be square, got {nrows}x{ncols}")]
    NotSquare {
        op: &'static str,
        nrows: usize,
        ncols: usize,
    },

    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),

    #[error(
        "matrix is singular: pivot {pivot:e} at column {column} below tolerance {tolerance:e}"
    )]
    Singular {
        column: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("{0}: non-finite value")]
    NonFinite(&'static str),

    #[error("zero diagonal entry at row {row}{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    ZeroDiagonal { row: usize, context: Option<String> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("missing parameter: {0}")]
    MissingParameter(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exact (dense) mode limited to {cap} unknowns, system has {dofs}")]
    OracleCapExceeded { dofs: usize, cap: usize },

    #[error("inconsistent block partition: {0}")]
    Partition(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
