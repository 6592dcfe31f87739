use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("channel generation failed: {0}")]
    Generation(String),

    #[error("singular resolvent (condition estimate {condition:.3e})")]
    SingularResolvent { condition: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("inner solver made no progress: {0}")]
    NoProgress(String),

    #[error("empty gradient batch")]
    EmptyBatch,

    #[error("infeasible scattering design: {0}")]
    InfeasibleDesign(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scheme {scheme}: {source}")]
    Scheme {
        scheme: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for the error kind, used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Generation(_) => "generation",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::DegenerateChannel(_) => "degenerate_channel",
            Error::NoProgress(_) => "no_progress",
            Error::EmptyBatch => "empty_batch",
            Error::InfeasibleDesign(_) => "infeasible_design",
            Error::Format(_) => "format",
            Error::Checksum { .. } => "checksum",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Sample { source, .. } | Error::Scheme { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
