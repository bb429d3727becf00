//! Error type shared across the crate.
//!
//! Two failure classes matter to callers: invalid inputs (configuration
//! mistakes, mathematical domain violations) and solver non-convergence.
//! The command line maps them to distinct exit codes.

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An input value or configuration field is invalid. The message names
    /// the offending field.
    #[error("{0}")]
    Config(String),

    /// A mathematical precondition was violated (probability outside (0,1),
    /// nonpositive variance, and so on).
    #[error("{0}")]
    Domain(String),

    /// The Newton iteration stalled or exhausted its iteration budget before
    /// reaching the residual tolerance.
    #[error("solver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    NonConvergence {
        iterations: usize,
        /// Last iterate, for diagnosis.
        last_iterate: Vec<f64>,
        /// Residual vector at the last iterate.
        residuals: Vec<f64>,
        max_residual: f64,
    },
}

impl Error {
    /// Process exit code the command line uses for this error: 1 for invalid
    /// input, 2 for solver non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Domain(_) => 1,
            Error::NonConvergence { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
