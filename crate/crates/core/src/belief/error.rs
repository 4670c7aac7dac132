use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("masses sum to {total}, expected 1")]
    NotNormalized { total: f64 },
    #[error("the empty set carries mass {mass}")]
    EmptyFocal { mass: f64 },
    #[error("negative or non-finite mass {mass}")]
    NegativeMass { mass: f64 },
    #[error("total conflict between mass functions (conflict degree {conflict})")]
    TotalConflict { conflict: f64 },
    #[error("frame mismatch: expected `{expected}`, found `{found}`")]
    FrameMismatch { expected: String, found: String },
    #[error("refining is not a partition: {reason} (classes: {})", classes.join(", "))]
    NotAPartition { reason: String, classes: Vec<String> },
    #[error("unknown class `{name}` in frame `{frame}`")]
    UnknownClass { frame: String, name: String },
    #[error("invalid frame `{frame}`: {reason}")]
    InvalidFrame { frame: String, reason: String },
    #[error("subset built for {found} classes used on a frame of {expected}")]
    SubsetSize { expected: usize, found: usize },
    #[error("invalid probability vector: {reason}")]
    InvalidDistribution { reason: String },
}
