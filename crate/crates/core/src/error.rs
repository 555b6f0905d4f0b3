use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state vector is not unit length (norm {norm})")]
    NonUnitState { norm: f64 },

    #[error("vector has zero or non-finite length")]
    DegenerateVector,

    #[error("back-action is not a proper rotation: {reason}")]
    NotARotation { reason: String },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("no trials for condition {first} -> {second}")]
    MissingCondition { first: String, second: String },

    #[error("marginal table for pair ({i}, {j}) is inconsistent: {reason}")]
    InconsistentMarginals { i: usize, j: usize, reason: String },

    #[error("invalid marginal system: {0}")]
    InvalidMarginals(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session `{0}` already exists")]
    SessionExists(String),

    #[error("trial {trial_index} of session `{session_id}` was already stored with a different payload")]
    IdempotencyConflict { session_id: String, trial_index: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
