use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("pixel ({u}, {v}) outside the {width}x{height} raster")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },

    #[error("depth normalization failed: {0}")]
    Normalization(String),

    #[error("triangulation failed: {0}")]
    Degenerate(String),

    #[error("loss term `{term}` is not finite at iteration {iteration}")]
    NonFinite { term: String, iteration: usize },

    #[error("optimization diverged at iteration {iteration}: total loss {loss:.3e} exceeds 1e6 x initial {initial:.3e}")]
    Divergence {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error("holdout split: {0}")]
    Split(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("synthetic scene generation: {0}")]
    Synthetic(String),

    #[error("failed to write {artifact} ({}): {source}", path.display())]
    Export {
        artifact: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Name of the pipeline stage the error originates from, used in CLI
    /// diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Decode { .. } | Error::Structure(_) => "scene",
            Error::OutOfBounds { .. } | Error::Normalization(_) => "scene",
            Error::Degenerate(_) => "mesh",
            Error::NonFinite { .. } | Error::Divergence { .. } => "optimizer",
            Error::Split(_) | Error::Evaluation(_) => "evaluation",
            Error::Config(_) => "config",
            Error::Synthetic(_) => "synthetic",
            Error::Export { .. } => "output",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Decode {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
