use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("sample out of range: {0}")]
    Range(String),
    #[error("invalid decomposition level: {0}")]
    Level(String),
    #[error("inconsistent pyramid: {0}")]
    Structure(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("tile layout error: {0}")]
    Layout(String),
    #[error("gradient error: {0}")]
    Gradient(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid selection: {0}")]
    Selection(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-parsable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { source, .. } => match source.kind() {
                std::io::ErrorKind::NotFound => "io.not_found",
                std::io::ErrorKind::PermissionDenied => "io.permission",
                _ => "io.other",
            },
            Error::Format { .. } => "format.header",
            Error::Dimension(_) => "format.dimension",
            Error::UnsupportedFormat(_) => "format.unsupported",
            Error::Range(_) => "format.range",
            Error::Level(_) => "wavelet.level",
            Error::Structure(_) => "wavelet.structure",
            Error::Size(_) => "shape.size",
            Error::Mode(_) => "flow.mode",
            Error::Layout(_) => "flow.layout",
            Error::Gradient(_) => "numeric.gradient",
            Error::Divergence(_) => "numeric.divergence",
            Error::Config(_) => "usage.config",
            Error::Selection(_) => "usage.selection",
        }
    }

    /// Process exit code: 2 usage/io, 3 numeric divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Config(_) | Error::Selection(_) => 2,
            Error::Format { .. }
            | Error::Dimension(_)
            | Error::UnsupportedFormat(_)
            | Error::Range(_)
            | Error::Mode(_) => 2,
            Error::Divergence(_) | Error::Gradient(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
