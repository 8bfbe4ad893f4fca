use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("input is empty")]
    EmptyInput,

    #[error("item `{item}` has conflicting metadata values `{first}` and `{second}`")]
    ConflictingMetadata {
        item: String,
        first: String,
        second: String,
    },

    #[error("item token `{0}` contains the reserved metadata separator ':'")]
    ReservedToken(String),

    #[error("vocabulary is empty after applying min_count={0}")]
    EmptyVocabulary(u64),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("index {index} out of range for vocabulary of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("negative sampling needs at least two tokens with nonzero frequency")]
    DegenerateSampler,

    #[error("all sampling weights are zero")]
    ZeroFrequency,

    #[error("non-finite value produced while updating pair ({input} -> {output})")]
    NonFinite { input: usize, output: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no training pairs could be generated")]
    NoTrainingPairs,

    #[error("no evaluable users")]
    NoEvaluableUsers,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
