use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("quality ranges do not overlap (baseline [{baseline_lo}, {baseline_hi}], variant [{variant_lo}, {variant_hi}])")]
    NoOverlap {
        baseline_lo: f64,
        baseline_hi: f64,
        variant_lo: f64,
        variant_hi: f64,
    },

    #[error("degenerate RD curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("{tool} failed: {message}\n--- command ---\n{command}\n--- output ---\n{output}")]
    Tool {
        tool: String,
        command: String,
        message: String,
        output: String,
    },

    #[error("geometry mismatch for {path}: {message}")]
    Geometry { path: PathBuf, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
