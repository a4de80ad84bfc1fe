use std::path::PathBuf;

use fieldsense_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: duplicate sensor id {id:?} on line {line}")]
    DuplicateId {
        path: PathBuf,
        id: String,
        line: u64,
    },

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 I/O, 2 validation, 3 infeasible selection, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. }
            | CliError::Validation { .. }
            | CliError::Schema { .. }
            | CliError::DuplicateId { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Check(_) => 4,
            CliError::Core(e) => match e {
                CoreError::Infeasible { .. } => 3,
                CoreError::Factorization { .. }
                | CoreError::QuadratureNotConverged { .. }
                | CoreError::DegenerateWeights { .. } => 4,
                CoreError::InvalidArgument(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::TooLarge { .. }
                | CoreError::DuplicateId(_) => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::validation("a", "b").exit_code(), 2);
        let infeasible = CoreError::Infeasible {
            full_mse: 2.0,
            qos_var: 1.0,
        };
        assert_eq!(CliError::from(infeasible).exit_code(), 3);
        let fact = CoreError::Factorization {
            size: 3,
            max_jitter: 1e-4,
        };
        assert_eq!(CliError::from(fact).exit_code(), 4);
        assert_eq!(
            CliError::from(CoreError::DegenerateWeights { ess: 1.0 }).exit_code(),
            4
        );
        assert_eq!(CliError::Check("x".into()).exit_code(), 4);
        assert_eq!(
            CliError::from(CoreError::TooLarge { n: 30, limit: 22 }).exit_code(),
            2
        );
    }
}
