use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid segment: endpoints coincide")]
    InvalidSegment,
    #[error("expected unit vector, got norm {0}")]
    NotUnit(f64),
    #[error("ray origin lies strictly inside the obstacle (distance {distance} < radius {radius})")]
    InsideObstacle { distance: f64, radius: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("not an edge of the transition graph: {0}")]
    NotAnEdge(String),
    #[error("solver did not converge after {iterations} sweeps (last movement {movement:e}, residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        movement: f64,
        residual: f64,
    },
    #[error("admissibility mismatch: {0}")]
    AdmissibilityMismatch(String),
    #[error("zero-length path")]
    ZeroLength,
    #[error("zero elapsed time")]
    ZeroTime,
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("target rejected: {0}")]
    Rejected(String),
    #[error("invalid winding reference point: {0}")]
    InvalidReference(String),
    #[error("obstacle too large: {0}")]
    ObstacleTooLarge(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

/// Coarse failure classes, used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Solver,
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::InvalidInput(_)
            | Error::WrongDimension { .. }
            | Error::InvalidArguments(_)
            | Error::EmptySequence
            | Error::NotAnEdge(_)
            | Error::OutOfRange(_)
            | Error::Rejected(_)
            | Error::InvalidReference(_)
            | Error::ObstacleTooLarge(_)
            | Error::NotImplemented(_)
            | Error::InvalidSegment
            | Error::NotUnit(_)
            | Error::ZeroLength
            | Error::ZeroTime => ErrorClass::Config,
            Error::NonConvergence { .. } | Error::InsideObstacle { .. } => ErrorClass::Solver,
            Error::AdmissibilityMismatch(_) | Error::Invariant(_) => ErrorClass::Invariant,
        }
    }

    /// Short stable identifier for machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSegment => "invalid_segment",
            Error::NotUnit(_) => "not_unit",
            Error::InsideObstacle { .. } => "inside_obstacle",
            Error::InvalidInput(_) => "invalid_input",
            Error::WrongDimension { .. } => "wrong_dimension",
            Error::Config(_) => "config",
            Error::InvalidArguments(_) => "invalid_arguments",
            Error::EmptySequence => "empty_sequence",
            Error::NotAnEdge(_) => "not_an_edge",
            Error::NonConvergence { .. } => "non_convergence",
            Error::AdmissibilityMismatch(_) => "admissibility_mismatch",
            Error::ZeroLength => "zero_length",
            Error::ZeroTime => "zero_time",
            Error::NotImplemented(_) => "not_implemented",
            Error::OutOfRange(_) => "out_of_range",
            Error::Rejected(_) => "rejected",
            Error::InvalidReference(_) => "invalid_reference",
            Error::ObstacleTooLarge(_) => "obstacle_too_large",
            Error::Invariant(_) => "invariant",
        }
    }
}
