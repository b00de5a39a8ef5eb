use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight model: {0}")]
    InvalidModel(String),

    #[error("invalid grid shape: {0}")]
    InvalidShape(String),

    #[error("no directed path stays within the cylinder of width {width}")]
    EmptyCylinder { width: usize },

    #[error("path count {count} exceeds enumeration cap {cap}")]
    PathCountOverCap { count: u128, cap: u128 },

    #[error("flip at ({x}, {y}) would decrease the weight from {old} to {new}")]
    DecreasingFlip { x: usize, y: usize, old: i64, new: i64 },

    #[error("vertex ({x}, {y}) lies outside the grid")]
    VertexOutOfRange { x: usize, y: usize },

    #[error("window I is empty (rows·n·p(1−p) = {variance})")]
    EmptyWindow { variance: f64 },

    #[error("no lo-mode site remains at k = {k}")]
    NoLoSite { k: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("need at least 3 distinct grid sizes with positive moments, got {0}")]
    TooFewFitPoints(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("spec hash mismatch on resume: record has {stored}, spec hashes to {current}")]
    SpecHashMismatch { stored: String, current: String },

    #[error("run stopped after {completed} of {total} replicates")]
    Interrupted { completed: usize, total: usize },

    #[error("record directory {0} already holds replicates; pass resume to continue it")]
    RecordExists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
