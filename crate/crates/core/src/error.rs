// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("singular covariance matrix (determinant {0:e})")]
    Singular(f64),
    #[error("rock placement failed after {attempts} attempts ({placed} of {requested} placed)")]
    Placement {
        attempts: usize,
        placed: usize,
        requested: usize,
    },
    #[error("scan produced no terrain intersections")]
    EmptyScan,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
