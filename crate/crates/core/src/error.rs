use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("component `{component}` has no variable `{name}`")]
    UnknownVariable { component: String, name: String },

    #[error("ill-typed value for `{name}`: {reason}")]
    TypeMismatch { name: String, reason: String },

    #[error("cannot decode `{name}`: {reason}")]
    Decode { name: String, reason: String },

    #[error("invalid handler for `{component}`: {reason}")]
    InvalidHandler { component: String, reason: String },

    #[error("healer memory disagrees with component `{component}`: {reason}")]
    MemoryCorruption { component: String, reason: String },

    #[error("snapshot does not belong to component `{component}`: {reason}")]
    ComponentMismatch { component: String, reason: String },

    #[error("memory integrity violation: {0}")]
    Integrity(String),

    #[error("{}parse error at line {line}, column {column}: {message}", source_label(.path))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn source_label(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(path: Option<&std::path::Path>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.map(Into::into),
            line: err.line(),
            column: err.column(),
            message: strip_location(err.to_string()),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn strip_location(mut message: String) -> String {
    if let Some(at) = message.rfind(" at line ") {
        message.truncate(at);
    }
    message
}
