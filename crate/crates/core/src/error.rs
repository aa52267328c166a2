use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },
    #[error("label {label} of node {node} is not below class count {class_count}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        class_count: usize,
    },
    #[error("feature row {row} has {found} columns, expected {expected}")]
    RaggedFeatures {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{0} rows given for {1} nodes")]
    RowCount(usize, usize),
    #[error("edge homophily is undefined on a graph without edges")]
    EmptyEdgeSet,
    #[error("operator is not symmetric")]
    NotSymmetric,
    #[error("dimension {n} exceeds dense eigensolver limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("basis order {k} exceeds polynomial order {order}")]
    OrderOutOfRange { k: usize, order: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular linear system")]
    Singular,
    #[error("backward already ran on this tape; reset gradients first")]
    BackwardTwice,
    #[error("loss must be 1x1, got {0}x{1}")]
    NonScalarLoss(usize, usize),
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("split leaves the training set empty ({0} nodes)")]
    EmptySplit(usize),
    #[error("non-finite loss {loss} at epoch {epoch}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error category; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NodeOutOfRange { .. }
            | Error::LabelOutOfRange { .. }
            | Error::RaggedFeatures { .. }
            | Error::RowCount(..)
            | Error::EmptyEdgeSet
            | Error::EmptySplit(_)
            | Error::EmptyMask
            | Error::TooLarge { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_) => ErrorKind::Data,
            Error::NotSymmetric
            | Error::NoConvergence
            | Error::ShapeMismatch { .. }
            | Error::OrderOutOfRange { .. }
            | Error::Singular
            | Error::BackwardTwice
            | Error::NonScalarLoss(..)
            | Error::ZeroVarianceColumn(_)
            | Error::Divergence { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
