use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not reach tolerance (error estimate {achieved:e}, requested {requested:e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("root finding did not converge: {0}")]
    RootFinding(String),

    #[error("operation requires {expected} incidence")]
    VariantMismatch { expected: &'static str },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Hessian is not positive definite (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures rooted in bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Io(_)
                | Error::VariantMismatch { .. }
                | Error::Precondition(_)
        )
    }
}
