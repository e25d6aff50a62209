use std::fmt;

use serde::Serialize;

/// Category printed in the `error[<kind>]:` prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Config,
    Parse,
    Io,
    Model,
    Bound,
    Numerical,
    Suite,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Config => "config",
            ErrorKind::Parse => "parse",
            ErrorKind::Io => "io",
            ErrorKind::Model => "model",
            ErrorKind::Bound => "bound",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Suite => "suite",
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct HarnessError {
    pub kind: ErrorKind,
    pub message: String,
}

impl HarnessError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    /// The single diagnostic line, newlines flattened.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        format!("error[{}]: {}", self.kind.as_str(), flat.join("; "))
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl From<bmv_core::Error> for HarnessError {
    fn from(e: bmv_core::Error) -> Self {
        use bmv_core::Error as E;
        let kind = match &e {
            E::Parse { .. } => ErrorKind::Parse,
            E::Io(_) => ErrorKind::Io,
            E::Config(_) | E::Scheme(_) => ErrorKind::Config,
            E::Bound(_) => ErrorKind::Bound,
            E::Numerical { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Model,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
