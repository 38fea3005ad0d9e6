//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-norm vector: inner-product estimation needs nonzero norms")]
    ZeroNormVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("init rank {rank} too large: no layer supports rank above {max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("incomplete telemetry: {0}")]
    IncompleteTelemetry(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },
    #[error("empty file: {0}")]
    EmptyFile(PathBuf),
    #[error("too few rows: {rows} row(s) cannot be split with train fraction {train_fraction}")]
    TooFewRows { rows: usize, train_fraction: f64 },
    #[error("degenerate centers: class centers must be distinct")]
    DegenerateCenters,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("chain failure: {0}")]
    ChainFailure(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
