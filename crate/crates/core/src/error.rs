use thiserror::Error;

/// Errors raised by the message-passing engine and the model built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An update would have to combine a forced-on and a forced-off input.
    #[error("indeterminate form (+inf combined with -inf){}", fmt_factor(*.factor))]
    Indeterminate { factor: Option<usize> },
    #[error("factor arity {arity} too large to enumerate (max {max})")]
    ArityTooLarge { arity: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("unknown corruption kind")]
    UnknownCorruption,
}

fn fmt_factor(f: Option<usize>) -> alloc::string::String {
    match f {
        Some(id) => alloc::format!(" at factor {id}"),
        None => alloc::string::String::new(),
    }
}

impl Error {
    pub(crate) fn at_factor(self, id: usize) -> Self {
        match self {
            Error::Indeterminate { factor: None } => Error::Indeterminate { factor: Some(id) },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
