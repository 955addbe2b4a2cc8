use thiserror::Error;

/// A violated domain invariant. Display strings name the invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("non-finite time value")]
    NonFinite,
    #[error("negative time")]
    NegativeTime,
    #[error("start>end")]
    StartAfterEnd,
    #[error("target exceeds duration")]
    TargetExceedsDuration,
    #[error("non-positive duration")]
    NonPositiveDuration,
    #[error("empty refinement sequence")]
    EmptySequence,
    #[error("empty noise schedule")]
    EmptySchedule,
    #[error("negative or non-finite sigma")]
    NegativeSigma,
    #[error("sigmas must be non-increasing")]
    IncreasingSigmas,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("cannot decode an empty refinement sequence")]
    EmptySequence,
    #[error("strategy `{0}` requires an auxiliary prediction")]
    MissingAux(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LossError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prediction and ground-truth lists differ in length ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("empty input")]
    Empty,
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange { row: usize, label: usize, classes: usize },
    #[error("negative lambda")]
    NegativeLambda,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no evaluation pairs")]
    Empty,
    #[error("threshold must lie in (0, 1]")]
    BadThreshold,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid annotation file: {message}")]
    Format { path: String, message: String },
}
