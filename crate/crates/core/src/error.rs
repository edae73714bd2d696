use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {message}")]
    MalformedJson { line: usize, message: String },

    #[error("line {line}: record `{record_id}`: field `{field}`: {message}")]
    Schema {
        line: usize,
        record_id: String,
        field: String,
        message: String,
    },

    #[error("line {line}: duplicate record_id `{record_id}`")]
    DuplicateRecord { line: usize, record_id: String },

    #[error("record `{0}` has no greedy sequence")]
    MissingGreedy(String),

    #[error("{estimator} requires per-token dist_entropy (token {token_index} has none)")]
    MissingEntropy {
        estimator: String,
        token_index: usize,
    },

    #[error("{estimator} requires {requirement}")]
    UnmetRequirement {
        estimator: String,
        requirement: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("Jacobi sweeps did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("provider request failed after {attempts} attempts: {message}")]
    Provider { attempts: usize, message: String },

    #[error("provider protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("PRR is undefined: all qualities are equal, oracle and random areas coincide")]
    UndefinedPrr,

    #[error("task group `{group}`: dataset `{dataset}` has an undefined PRR")]
    PoisonedGroup { group: String, dataset: String },

    #[error("need at least 2 scored instances, got {0}")]
    TooFewInstances(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(
        line: usize,
        record_id: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Schema {
            line,
            record_id: record_id.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures that originate at the similarity provider.
    pub fn is_provider(&self) -> bool {
        matches!(self, Error::Provider { .. } | Error::ProtocolViolation(_))
    }
}
