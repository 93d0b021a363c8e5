use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested bound is undefined for this dataset (e.g. zero counts).
    #[error("not computable: {0}")]
    NotComputable(String),

    /// The data carry no variability on which to base the calculation.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge: {context}{}", rr0.map(|r| format!(" (at RR0 = {r})")).unwrap_or_default())]
    Convergence { context: String, rr0: Option<f64> },

    #[error("insufficient exceedances: found {found}, need at least {required}")]
    InsufficientExceedances { found: usize, required: usize },

    #[error("infeasible size: {0}")]
    InfeasibleSize(String),

    #[error("table format: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn not_computable(msg: impl Into<String>) -> Self {
        Error::NotComputable(msg.into())
    }
}
