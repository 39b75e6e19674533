use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context} at {location}: {message}")]
    Parse {
        context: String,
        location: String,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported audio format: {field} is {found}, expected {expected}")]
    Format {
        field: &'static str,
        found: String,
        expected: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate feature: dimension {dim} has zero variance")]
    DegenerateFeature { dim: usize },

    #[error("capacity error: requested {requested} items but only {available} available")]
    Capacity { requested: usize, available: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unauthorized: {0}")]
    Auth(String),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            location: format!("line {} column {}", err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Loads a JSON document, reporting the failing field path alongside line/column.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = read_to_string(path)?;
    parse_json(&text, &path.display().to_string())
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            context: context.to_string(),
            location: format!("line {} column {} (field `{}`)", inner.line(), inner.column(), path),
            message: inner.to_string(),
        }
    })
}

/// Serializes with sorted object keys so repeated saves are byte-identical.
pub(crate) fn to_canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::json("serialize", &e))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::json("serialize", &e))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    write_string(path, &to_canonical_json(value)?)
}
