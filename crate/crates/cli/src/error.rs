use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(smap::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<smap::Error> for CliError {
    fn from(e: smap::Error) -> Self {
        match e {
            smap::Error::InvalidParams(_) | smap::Error::InvalidGrid(_) => CliError::Config(e.to_string()),
            e => CliError::Solver(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
