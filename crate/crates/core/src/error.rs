use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid exposure system: {0}")]
    InvalidSystem(String),

    #[error("portfolio generation failed after {attempts} attempts (d_target = {d_target})")]
    RetriesExhausted { attempts: usize, d_target: f64 },

    #[error("sweep cell (p[{p_index}] = {p}, d[{d_index}] = {d}), trial {trial}")]
    Cell {
        p_index: usize,
        d_index: usize,
        p: f64,
        d: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no sweep slice for p = {p}, s = {s}")]
    MissingSlice { p: f64, s: f64 },

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("grid budget exceeded: {required} evaluations requested, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
