//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent. Carries the
    /// offending field name so CLI users can find it.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// The configuration document could not be parsed at all.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index (action, state, agent) is out of range.
    #[error("index error: {0}")]
    Index(String),

    /// Two tables that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An exhaustive enumeration would exceed the guarded size limit.
    #[error("{what} enumeration too large: {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::ConfigParse(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
