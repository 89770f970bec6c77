use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building or evaluating a computation graph.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("tensor of shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("unknown op kind `{0}`")]
    UnknownOp(String),
    #[error("{op}: incompatible input shapes {shapes:?}")]
    Shape {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },
    #[error("{op}: expected {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("{op}: invalid attribute: {reason}")]
    Attribute { op: &'static str, reason: String },
    #[error("node {node} ({op}) produced a non-finite value")]
    NonFinite { node: usize, op: &'static str },
    #[error("loss node {node} must be a scalar, has shape {shape:?}")]
    NonScalarLoss { node: usize, shape: Vec<usize> },
    #[error("node {0} has not been evaluated")]
    NotEvaluated(usize),
}

/// Errors from parsing datasets, embeddings and model archives.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {reason}")]
    Line {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("archive is missing tensors: {}", .0.join(", "))]
    MissingTensors(Vec<String>),
    #[error("archive tensor `{0}` is truncated")]
    TruncatedTensor(String),
}

impl DataError {
    pub(crate) fn line(path: &str, line: usize, reason: impl Into<String>) -> Self {
        DataError::Line {
            path: path.to_string(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing successive-regularization snapshot for {0}")]
    MissingSnapshot(String),
    #[error("dataset for task {0} is empty")]
    EmptyDataset(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
