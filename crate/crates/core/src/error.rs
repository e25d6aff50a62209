use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("scheme: {0}")]
    Scheme(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("bound violated: {0}")]
    Bound(String),

    #[error("numerical failure at step {step} (t = {time}): {detail}")]
    Numerical { step: usize, time: f64, detail: String },

    #[error("time {0} is not on the recorded grid")]
    OffGrid(f64),

    #[error("uncertified trial function: {0}")]
    Uncertified(String),

    #[error("coupling: {0}")]
    Coupling(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
