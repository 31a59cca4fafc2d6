use thiserror::Error;

pub type Result<T> = std::result::Result<T, RiskError>;

#[derive(Debug, Error)]
pub enum RiskError {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("alpha must lie in the open interval (0.5, 1), got {0}")]
    InvalidAlpha(f64),

    /// A variance that has to be strictly positive is zero or negative.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// The aggregate `X_i + X_A` has zero variance, so statistics that
    /// condition on the system are undefined.
    #[error("degenerate system: variance of X_i + X_A is zero")]
    DegenerateSystem,

    #[error("degenerate bank {0:?}: zero variance")]
    DegenerateBank(String),

    #[error("unknown bank label {0:?}")]
    UnknownBank(String),

    /// Two routes to the same statistic disagree.
    #[error("internal consistency check failed for {identity}: {lhs} vs {rhs}")]
    InternalConsistency {
        identity: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("covariance estimate is not positive semidefinite (smallest eigenvalue {0})")]
    NotPositiveSemidefinite(f64),

    #[error("thin band: {members} samples inside the conditioning band, need at least {required}")]
    ThinBand { members: usize, required: usize },

    #[error("thin tail: {count} samples in the tail, need at least {required}")]
    ThinTail { count: usize, required: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RiskError {
    pub(crate) fn parse(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        RiskError::Parse {
            row,
            column: column.into(),
            message: message.into(),
        }
    }
}
