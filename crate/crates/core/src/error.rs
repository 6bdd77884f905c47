use thiserror::Error;

/// Errors produced by the decomposition pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={len}")]
    Bounds { index: usize, len: usize },

    #[error("invalid fixture spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Format(_) => "format",
            Error::Data(_) => "data",
            Error::Length(_) => "length",
            Error::Rank(_) => "rank",
            Error::Conditioning(_) => "conditioning",
            Error::Numeric(_) => "numeric",
            Error::Domain(_) => "domain",
            Error::Bounds { .. } => "bounds",
            Error::Spec(_) => "spec",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for failures caused by the input (as opposed to the numerics).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::Format(_)
                | Error::Data(_)
                | Error::Length(_)
                | Error::Bounds { .. }
                | Error::Spec(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
