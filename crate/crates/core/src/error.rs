use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two points that must be distinct coincide, or a point sits on a wall line.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("angle undefined for a zero-length direction vector")]
    UndefinedAngle,

    /// Position is unidentifiable: needs at least one LOS path or two NLOS paths.
    #[error("insufficient paths: {n_los} LOS and {n_nlos} NLOS (need >= 1 LOS or >= 2 NLOS)")]
    InsufficientPaths { n_los: usize, n_nlos: usize },

    #[error("measurement covariance is not positive definite (entry {index} = {value})")]
    SingularCovariance { index: usize, value: f64 },

    #[error("Fisher information is singular (condition number {condition:e})")]
    SingularFisher { condition: f64 },

    #[error("all {n_trials} Monte-Carlo trials failed")]
    AllTrialsFailed { n_trials: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A parameter vector that does not match the path set it is evaluated against.
    #[error("parameter/path mismatch: {0}")]
    Inconsistent(String),
}
