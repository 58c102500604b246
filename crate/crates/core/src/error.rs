use std::io;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LrpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl LrpError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LrpError::InvalidInput(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LrpError::InvariantViolation(_) => 2,
            LrpError::Infeasible(_) => 3,
            LrpError::Io(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LrpError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_cli_contract() {
        assert_eq!(LrpError::InvariantViolation("x".into()).exit_code(), 2);
        assert_eq!(LrpError::Infeasible("x".into()).exit_code(), 3);
        assert_eq!(LrpError::from(io::Error::other("x")).exit_code(), 4);
        assert_eq!(LrpError::Config("x".into()).exit_code(), 1);
        assert_eq!(LrpError::NonConvergence { iterations: 1, residual: 1.0 }.exit_code(), 1);
    }
}
