//! Error types shared across the crate.

use crate::pool::SampleId;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An operation was called with state that violates its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A sample id does not exist in the dataset or pool.
    #[error("unknown sample id {0}")]
    UnknownSample(SampleId),

    /// A data or config file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A policy spec string failed to parse.
    #[error("policy spec error at byte {position}: {message}")]
    PolicySpec { position: usize, message: String },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    /// A committee member failed to train.
    #[error("committee member {member} failed: {source}")]
    CommitteeMember {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    /// Not enough labeled data to fit a model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The operation is not defined for this model family or dataset kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Cosine distance is undefined for a zero-norm vector.
    #[error("undefined distance: zero-norm feature vector")]
    UndefinedDistance,

    /// Two aligned inputs have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A score vector or probability input is malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An event stream could not be replayed consistently.
    #[error("malformed event stream: {0}")]
    MalformedEvents(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}
