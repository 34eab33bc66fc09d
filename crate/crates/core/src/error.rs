use thiserror::Error;

/// Errors raised by the simulation, propagation and benchmark layers.
///
/// The variants line up with the process exit codes used by the CLI:
/// configuration problems, numeric/domain failures and resource budgets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error in {term}: {detail}")]
    Domain { term: &'static str, detail: String },

    #[error("resource budget exceeded: {0}")]
    Resource(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::Numeric(_) | Error::Domain { .. } => 3,
            Error::Resource(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")))
    }
}
