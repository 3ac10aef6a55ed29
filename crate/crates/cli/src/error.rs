use std::process::ExitCode;

use glmvae_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{failed} of {total} seeds failed")]
    SeedsFailed { failed: usize, total: usize },
}

impl CliError {
    /// 2 for problems with the configuration or inputs, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> ExitCode {
        let numeric = match self {
            CliError::Config(_) | CliError::Io(_) => false,
            CliError::SeedsFailed { .. } => true,
            CliError::Core(e) => matches!(
                e,
                CoreError::NotPositiveDefinite
                    | CoreError::NonFinite(_)
                    | CoreError::NonFiniteLoss { .. }
                    | CoreError::SigmaEstimatorUndefined { .. }
                    | CoreError::NotSymmetric(_)
            ),
        };
        ExitCode::from(if numeric { 3 } else { 2 })
    }
}
