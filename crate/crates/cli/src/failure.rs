use std::fmt;

use mnar_pcor::Error;

/// Process exit categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Unreadable = 2,
    Usage = 3,
    Mechanism = 4,
    Estimation = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn unreadable(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Unreadable, message)
    }

    /// Maps an error from argument validation (bad γ, alpha, grid…).
    pub fn from_config(err: Error) -> Self {
        match err {
            Error::Mechanism { .. } => Self::new(ExitCode::Mechanism, err.to_string()),
            other => Self::usage(other.to_string()),
        }
    }

    /// Maps an error raised while estimating.
    pub fn from_estimation(err: Error) -> Self {
        match err {
            Error::Mechanism { .. } => Self::new(ExitCode::Mechanism, err.to_string()),
            Error::Io(_) => Self::unreadable(err.to_string()),
            Error::UnreliableRegion { ref failures, .. } => {
                let mut msg = err.to_string();
                if let Some((g1, g2, reason)) = failures.first() {
                    msg.push_str(&format!("; first failure at γ = ({g1}, {g2}): {reason}"));
                }
                Self::new(ExitCode::Estimation, msg)
            }
            other => Self::new(ExitCode::Estimation, other.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, Failure>;
