use thiserror::Error;

pub type Result<T, E = PdpError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operator has no negative eigenvalue (no bound state)")]
    NoBoundState,
    #[error("resonance below the continuum edge: lambda + mu = {0:e} <= 0")]
    ResonanceBelowCutoff(f64),
    #[error("singular linear system ({0})")]
    SingularSystem(&'static str),
    #[error("scattering solve violates unitarity: ||r|^2 + |t|^2 - 1| = {0:e}")]
    UnitarityViolation(f64),
    #[error("Wronskian variance {variance:e} exceeds tolerance {tolerance:e}")]
    WronskianInvalid { variance: f64, tolerance: f64 },
    #[error("infeasible point: {0}")]
    InfeasiblePoint(String),
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("numerical blow-up: {0}")]
    NumericalBlowup(String),
}

impl PdpError {
    /// True for errors that describe the problem data (no bound state,
    /// infeasible potentials) rather than a failing numerical method.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            PdpError::NoBoundState
                | PdpError::ResonanceBelowCutoff(_)
                | PdpError::InfeasiblePoint(_)
                | PdpError::InfeasibleStart(_)
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            PdpError::InvalidGrid(_) | PdpError::InvalidParameter(_) | PdpError::LengthMismatch { .. }
        )
    }
}
