use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tuple is not in the domain: min eigenvalue of I - Phi(I) is {min_eig:.3e} (tolerance {tol:.1e})")]
    NotInDomain { min_eig: f64, tol: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("identity violated: {what} residual {residual:.3e} exceeds {tol:.1e}")]
    IdentityViolation { what: String, residual: f64, tol: f64 },

    #[error("tuple does not annihilate generator {index}: residual {residual:.3e}")]
    NotInVariety { index: usize, residual: f64 },

    #[error("evaluation order ambiguous: cross-commutation residual {residual:.3e} exceeds {tol:.1e}")]
    OrderAmbiguous { residual: f64, tol: f64 },

    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
