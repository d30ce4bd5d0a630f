use std::fmt;

use thiserror::Error;

/// Every invariant violation found while validating an input, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub violations: Vec<String>,
}

impl ValidationError {
    pub fn new(violations: Vec<String>) -> Self {
        Self { violations }
    }

    pub fn single(msg: impl Into<String>) -> Self {
        Self { violations: vec![msg.into()] }
    }

    /// `Ok(())` when nothing was collected.
    pub fn check(violations: Vec<String>) -> Result<(), ValidationError> {
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Self { violations })
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s): {}", self.violations.len(), self.violations.join("; "))
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("intervention rejected: {0}")]
    Rejected(String),

    #[error("integration produced a non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("mismatched horizons: {0}")]
    MismatchedHorizons(String),

    #[error("channel {0} cannot be tuned: {1}")]
    UnusableChannel(String, String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
