use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no summary row for {0}")]
    MissingCell(String),
    #[error(transparent)]
    Core(#[from] islandpf::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
