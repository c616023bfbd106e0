use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the engine. File-related variants carry the path and,
/// where meaningful, the 1-based line number of the offending record.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate subject id {subject_id:?}")]
    DuplicateSubject { subject_id: String },

    #[error("{context}: dimension mismatch, expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("subject {subject_id:?}: {msg}")]
    InvalidSubject { subject_id: String, msg: String },

    #[error("unknown subject id {0:?}")]
    UnknownSubject(String),

    #[error("cannot build an index over an empty descriptor set")]
    EmptyDescriptorSet,

    #[error("subject {0:?} has no deep vector")]
    MissingModality(String),

    #[error("no admissible training vectors")]
    MissingEvidence,

    #[error("mixed binary and real-valued vectors: {0}")]
    MixedVectorKinds(String),

    #[error("binarization requires real-valued input")]
    AlreadyBinary,

    #[error("threshold fit requires at least 2 training vectors, got {0}")]
    TooFewSamples(usize),

    #[error("entropy of all-zero counts is undefined")]
    EmptyCounts,

    #[error("labels must contain at least one positive and one negative")]
    SingleClassLabels,

    #[error("group protocol requires exactly 2 group labels, found {0}")]
    GroupLabelCount(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("need at least {need} valid score cells, found {got}")]
    InsufficientCells { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
