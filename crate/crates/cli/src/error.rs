use ppde_core::{HarnessError, OracleError, SchemeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("budget: {0}")]
    Budget(String),
    #[error("check: {0}")]
    Check(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Self::Config {
            field: field.to_owned(),
            reason: reason.into(),
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Self::Internal(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Internal(_) => 1,
            Self::Config { .. } => 2,
            Self::Budget(_) => 3,
            Self::Check(_) => 4,
        }
    }

    /// One line, newlines flattened, prefixed with `error:`.
    pub fn line(&self) -> String {
        format!("error: {}", self.to_string().replace(['\n', '\r'], " "))
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::BudgetExceeded { .. } => Self::Budget(e.to_string()),
            SchemeError::SearchFailed(_) => Self::Check(e.to_string()),
            SchemeError::Stencil(s) => Self::config("scheme", s.to_string()),
            other => Self::internal(other),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Unsupported { .. } => Self::config("problem", e.to_string()),
            OracleError::BadArgument(_) => Self::config("run", e.to_string()),
            OracleError::Scheme(s) => s.into(),
            other => Self::internal(other),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::BadInput(reason) => Self::config("run", reason),
            HarnessError::Oracle(o) => o.into(),
            HarnessError::Scheme(s) => s.into(),
            other => Self::internal(other),
        }
    }
}
