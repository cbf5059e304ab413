use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: target lies within {distance:e} m of node {node}")]
    DegenerateGeometry { node: usize, distance: f64 },

    #[error("invalid hop schedule: {0}")]
    BadSchedule(String),

    #[error("spectrum carries no power")]
    EmptySpectrum,

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("schedule moments are not centered (|S1| = {s1:e}, |F1| = {f1:e})")]
    NotCentered { s1: f64, f1: f64 },

    #[error("singular geometry: condition number {condition:e} exceeds {limit:e}")]
    SingularGeometry { condition: f64, limit: f64 },

    #[error("finite-difference step too large: entry ({row}, {col}) moved by {change:.3} when halving the step")]
    StepTooLarge { row: usize, col: usize, change: f64 },

    #[error("search box contains no grid cell: {0}")]
    EmptyBox(String),

    #[error("stage A peak on window boundary for path {path}")]
    WindowMiss { path: usize },

    #[error("fusion needs at least {needed} usable paths, got {got}")]
    InsufficientPaths { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error in {path}: {key}: {message}")]
    Config {
        path: PathBuf,
        key: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
