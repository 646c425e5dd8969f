use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Evaluation of a normalized model at a latent whose pre-normalization
    /// output norm does not exceed `r_min`.
    #[error("domain violation: pre-normalization norm {norm:e} does not exceed R_min = {r_min:e}")]
    DomainViolation { norm: f64, r_min: f64 },

    #[error("optimizer diverged after {steps} steps (non-finite objective or gradient)")]
    Diverged { last_finite: Vec<f64>, steps: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::invalid(format!(
            "{what}: length {got} does not match expected {expected}"
        )));
    }
    Ok(())
}
