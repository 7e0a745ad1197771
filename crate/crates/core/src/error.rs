use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent configuration (singular lighting, size mismatch, bad field).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("no spectral peak: series has no energy outside DC")]
    NoSpectralPeak,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("training diverged at epoch {epoch}, batch {batch} (loss = {loss}); lower the learning rate")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
