use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch for `{key}`: expected {expected}, found {found}")]
    DimensionMismatch {
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate entry `{0}`")]
    Duplicate(String),

    #[error("layer {layer} is not available (layer_count = {layer_count})")]
    UnknownLayer { layer: usize, layer_count: usize },

    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),

    #[error("target sets differ; only in first: {only_left:?}; only in second: {only_right:?}")]
    TargetMismatch {
        only_left: Vec<String>,
        only_right: Vec<String>,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing input: {0}")]
    Missing(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// Builds a [`Error::TargetMismatch`] from two key sets, or `None` when they agree.
    pub(crate) fn target_mismatch<'a, L, R>(left: L, right: R) -> Option<Self>
    where
        L: IntoIterator<Item = &'a String>,
        R: IntoIterator<Item = &'a String>,
    {
        let left: std::collections::BTreeSet<&String> = left.into_iter().collect();
        let right: std::collections::BTreeSet<&String> = right.into_iter().collect();
        if left == right {
            return None;
        }
        Some(Error::TargetMismatch {
            only_left: left.difference(&right).map(|s| s.to_string()).collect(),
            only_right: right.difference(&left).map(|s| s.to_string()).collect(),
        })
    }

    /// True when the failure is caused by the caller's input rather than the program.
    pub fn is_bad_input(&self) -> bool {
        !matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound
            && source.kind() != std::io::ErrorKind::InvalidData)
    }
}
