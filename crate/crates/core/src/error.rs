use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mathematically undefined request, e.g. a quantile at 0 or 1.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{file}: parse error at line {line}: {message}")]
    Parse { file: String, line: u64, message: String },

    #[error("validation error in field `{field}`{}: {message}", location(.line))]
    Validation {
        field: &'static str,
        line: Option<u64>,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

fn location(line: &Option<u64>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field: &'static str, line: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Validation {
            field,
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 = validation / bad input, 2 = I/O, 3 = internal invariant breach.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidArgument(_) | Error::Domain(_) | Error::Parse { .. } | Error::Validation { .. } => 1,
            Error::Io { .. } => 2,
            Error::Invariant(_) => 3,
        }
    }
}
