use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Evidence that a local connection form is not closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosednessViolation {
    pub point: Vec<f64>,
    /// Fiber component index.
    pub component: usize,
    /// The pair of base directions (j, k) whose mixed partials disagree.
    pub pair: (usize, usize),
    /// Signed value of dA_{aj}/dm_k - dA_{ak}/dm_j at `point`.
    pub violation: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("adaptive quadrature did not converge on [{a}, {b}] within depth {depth}")]
    QuadratureNoConvergence { a: f64, b: f64, depth: u32 },

    #[error("mode `{0}` has no potential")]
    NoPotential(String),

    #[error(
        "connection form is not exact: component {} pair ({}, {}) violates closedness by {:.3e} at {:?}",
        .0.component, .0.pair.0, .0.pair.1, .0.violation, .0.point
    )]
    NotExact(ClosednessViolation),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("ambiguous crossing in segment {segment}: guard `{guard}` vanishes on an interval near t = {t}")]
    AmbiguousCrossing {
        segment: usize,
        guard: String,
        t: f64,
    },

    #[error("continuity violation at t = {t}: {message}")]
    ContinuityViolation { t: f64, message: String },

    #[error(
        "quadrature and potential results disagree by {difference:.3e} (allowed {allowed:.3e})"
    )]
    CrossCheckFailed { difference: f64, allowed: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{location}: {message}")]
    Definition { location: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failure classes the command line maps onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_)
            | Error::QuadratureNoConvergence { .. }
            | Error::CrossCheckFailed { .. }
            | Error::AmbiguousCrossing { .. }
            | Error::InsufficientData(_) => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn definition(location: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Definition {
            location: location.into(),
            message: err.to_string(),
        }
    }
}
