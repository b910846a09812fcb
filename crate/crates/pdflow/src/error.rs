use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] pdflow_core::Error),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("comparison error: {0}")]
    Compare(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for solver and integrator failures.
    pub fn exit_code(&self) -> i32 {
        use pdflow_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Compare(_) | CliError::Csv(_) | CliError::Io(_) => 2,
            CliError::Core(E::Config(_) | E::Capability(_) | E::UnsupportedConjugate(_) | E::UnsupportedDiagnostic(_)) => 2,
            CliError::Core(_) | CliError::Solver(_) => 3,
        }
    }
}
