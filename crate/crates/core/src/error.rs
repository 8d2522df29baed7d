use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed image: {reason}")]
    BadImage { path: PathBuf, reason: String },

    #[error("no frames matching `{pattern}` in {dir}")]
    EmptySequence { dir: PathBuf, pattern: String },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    Dimensions {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("window of radius {radius} at ({x}, {y}) does not fit a {width}x{height} frame")]
    WindowOutside {
        x: usize,
        y: usize,
        radius: usize,
        width: usize,
        height: usize,
    },

    #[error("background model used before initialization")]
    Uninitialized,

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("poisson solver did not converge after {sweeps} sweeps (relative residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("smo did not converge after {passes} passes")]
    SmoNoConvergence { passes: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
