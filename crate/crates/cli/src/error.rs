use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or missing inputs; nothing was run.
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<mtscene_core::Error> for CliError {
    fn from(e: mtscene_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
