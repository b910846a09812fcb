use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported conjugate: {0}")]
    UnsupportedConjugate(String),
    #[error("schedule degenerate at t = {t}: {what}")]
    ScheduleDegenerate { t: f64, what: String },
    #[error("family has no convergence rate")]
    NoRate,
    #[error("preconditioner singular at t = {t}: Schur factor {factor} for eigenvalue {eigenvalue} of AA^T")]
    PreconditionerSingular { t: f64, eigenvalue: f64, factor: f64 },
    #[error("step size underflow at t = {t}; the field looks stiff, try the ProxEuler backend")]
    Stiffness { t: f64 },
    #[error("inner fixed-point loop did not contract at t = {t} after {iterations} iterations; reduce h")]
    ContractionFailure { t: f64, iterations: usize },
    #[error("state derivative unavailable")]
    DerivativeUnavailable,
    #[error("ergodic average undefined at t = {t}")]
    UndefinedErgodic { t: f64 },
    #[error("unsupported diagnostic: {0}")]
    UnsupportedDiagnostic(String),
    #[error("anchor infeasible: {0}")]
    AnchorInfeasible(String),
    #[error("step {step} exceeds 1/L = {limit}; iteration may diverge")]
    DivergenceRisk { step: f64, limit: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
}

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}
