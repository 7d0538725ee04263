use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration. Exit code 1.
    #[error("{0}")]
    Usage(String),

    /// Unreadable, malformed or inconsistent input data. Exit code 2.
    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] adiabatic_pdf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        use adiabatic_pdf::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidArgument(_)) => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    }
}

/// Reclassifies a core error as a data error.
pub fn data(e: adiabatic_pdf::Error) -> CliError {
    CliError::Data(e.to_string())
}
