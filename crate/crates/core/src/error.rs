use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("node id {id} out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { id: u64, n_nodes: usize },

    #[error("node id {0} does not fit the 32-bit node index")]
    IdOverflow(u64),

    #[error("candidate node {0} is not adjacent to any node of the source set")]
    NotANeighbor(NodeId),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("sampling weights sum to zero")]
    ZeroTotalWeight,

    #[error("no remote candidates, skewing has no effect")]
    NoRemoteCandidates,

    #[error("negative discriminant {0} in the scale-factor bound")]
    NegativeDiscriminant(f64),

    #[error("the two forms of the skewed variance bound disagree: {first} vs {second}")]
    BoundFormMismatch { first: f64, second: f64 },

    #[error("graph has no {0} attached")]
    MissingData(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
