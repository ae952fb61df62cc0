use std::path::PathBuf;

/// Every failure the binary reports, mapped onto a fixed exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadInput {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Core(#[from] freshreplay::Error),
    #[error("cannot write {path}: {source}")]
    WriteOutput {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("staleness gap {gap:.4} is below the required {required}")]
    StalenessGate { gap: f64, required: f64 },
    #[error("refresh median {median_ms:.2} ms exceeds the {budget_ms} ms budget")]
    RefreshBudget { median_ms: f64, budget_ms: f64 },
}

impl CliError {
    /// 1 input or validation, 2 runtime, 3 staleness gate, 4 refresh budget.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ReadInput { .. } | CliError::Config(_) | CliError::Invalid(_) => 1,
            CliError::Core(_) | CliError::WriteOutput { .. } => 2,
            CliError::StalenessGate { .. } => 3,
            CliError::RefreshBudget { .. } => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
