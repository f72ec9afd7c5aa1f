use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, unreadable or malformed input files.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] wahtor_core::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use wahtor_core::Error as E;
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) => match e {
                E::Parse { .. } | E::Index { .. } | E::Consistency { .. } | E::Group(_) | E::Io(_) | E::Json(_) => 2,
                _ => 3,
            },
            CliError::Output(_) => 1,
        }
    }
}
