use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or parameters.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] fermibrick::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A verification check exceeded its tolerance.
    #[error("verification failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(e) if !e.is_internal() => 1,
            CliError::Core(_) | CliError::Check(_) => 2,
        }
    }
}
