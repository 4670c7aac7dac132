use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::AdError;
use crate::belief::BeliefError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameter `{0}` is not registered on the tape")]
    UnknownParameter(String),
    #[error("non-finite input value at position {0}")]
    NonFiniteInput(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("duplicate frame id `{0}`")]
    DuplicateFrameId(String),
    #[error("no refining for frame `{0}`")]
    MissingRefining(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("checkpoint is for frame `{found}`, expected `{expected}`")]
    CheckpointFrame { expected: String, found: String },
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
