use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("vertex {vertex} out of range (|V| = {count})")]
    VertexOutOfRange { vertex: usize, count: usize },

    /// Power iteration failed to converge; carries the last iterate.
    #[error("{what} did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last_change: f64,
        last: Vec<f64>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite loss for pair (center {center}, context {context})")]
    NonFiniteLoss { center: usize, context: usize },

    #[error("training diverged in epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("vertex sets differ; missing labels: {}", .missing.join(", "))]
    VertexMismatch { missing: Vec<String> },

    #[error("unknown {kind} tag {tag:?}")]
    UnknownTag { kind: &'static str, tag: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
