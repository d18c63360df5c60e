use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hcn_core::Error),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Error {
        Error::Format { what, msg: msg.into() }
    }

    /// True for errors caused by bad input rather than a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Json { .. }
                | Error::Core(hcn_core::Error::Config(_))
                | Error::Core(hcn_core::Error::Shape(_))
                | Error::Core(hcn_core::Error::UnknownCorruption)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
