use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] riskratio::Error),
}

impl CliError {
    /// 0 success, 2 parse, 3 not computable, 4 convergence, 5 infeasible size.
    pub fn exit_code(&self) -> i32 {
        use riskratio::Error as E;
        match self {
            CliError::Parse(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::TableFormat(_) => 2,
                E::NotComputable(_) | E::Degenerate(_) | E::InsufficientExceedances { .. } => 3,
                E::Convergence { .. } => 4,
                E::InfeasibleSize(_) => 5,
                E::Io(_) => 1,
            },
        }
    }
}
