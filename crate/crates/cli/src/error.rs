use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] levy_ou::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad configuration, 2 for errors raised by the models.
    pub fn exit_code(&self) -> u8 {
        use levy_ou::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(E::Domain(_) | E::Config(_) | E::Parse { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

pub const EXIT_VERIFICATION_FAILED: u8 = 3;
