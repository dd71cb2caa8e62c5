//! Crate-wide error type and result alias.
//!
//! Errors are grouped by how the command-line tool must report them:
//! validation problems (bad inputs, malformed files, violated preconditions)
//! exit with code 2, numerical failures (bracketing, positive-definiteness,
//! non-finite posteriors, calibration) with code 3, and partially completed
//! replication runs with code 4.

use thiserror::Error;

/// Convenient result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input or violated precondition; maps to exit code 2.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Structured-document (JSON) schema violation with a JSON-pointer
    /// location; maps to exit code 2.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    /// Numerical failure at runtime (failed bracket, non-positive-definite
    /// matrix, non-finite posterior, calibration failure); exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A replication batch finished with some failed replications; exit
    /// code 4. Partial results were still written.
    #[error("partial replication: {failed} of {total} replications failed")]
    PartialReplication { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 0 success, 2 validation error,
    /// 3 numerical failure, 4 partial replication.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Schema { .. } => 2,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Numerical(_) => 3,
            Error::PartialReplication { .. } => 4,
        }
    }

    /// Shorthand for an [`Error::Invalid`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Shorthand for an [`Error::Numerical`] with a formatted message.
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(Error::invalid("x").exit_code(), 2);
        assert_eq!(
            Error::Schema {
                pointer: "/a/0".into(),
                message: "bad".into()
            }
            .exit_code(),
            2
        );
        assert_eq!(Error::numerical("x").exit_code(), 3);
        assert_eq!(
            Error::PartialReplication {
                failed: 1,
                total: 8
            }
            .exit_code(),
            4
        );
    }

    #[test]
    fn messages_render_with_context() {
        let e = Error::Schema {
            pointer: "/library/2/spline".into(),
            message: "knots must be increasing".into(),
        };
        let s = e.to_string();
        assert!(s.contains("/library/2/spline"));
        assert!(s.contains("knots must be increasing"));
    }
}
