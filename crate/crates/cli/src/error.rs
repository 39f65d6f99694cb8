use std::fmt;

use pdp_core::PdpError;

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// No bound state, infeasible potential.
    Domain,
    /// A solver or check failed.
    Solver,
    /// Unreadable or inconsistent configuration and input files.
    Config,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Domain => 2,
            ExitKind::Solver => 3,
            ExitKind::Config => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        CliError { kind, error: error.into() }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitKind::Config, error)
    }

    pub fn solver(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitKind::Solver, error)
    }

    pub fn code(&self) -> i32 {
        self.kind.code()
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError { kind: self.kind, error: self.error.context(msg) }
    }
}

pub fn classify(err: &PdpError) -> ExitKind {
    if err.is_domain_error() {
        ExitKind::Domain
    } else if err.is_config_error() {
        ExitKind::Config
    } else {
        ExitKind::Solver
    }
}

impl From<PdpError> for CliError {
    fn from(err: PdpError) -> Self {
        CliError::new(classify(&err), err)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
