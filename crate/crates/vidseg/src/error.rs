use std::path::{Path, PathBuf};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Malformed or out-of-range run configuration. The message names the
    /// offending key and the legal range.
    #[error("config: {0}")]
    Config(String),

    /// Violated precondition or malformed data.
    #[error("{0}")]
    InvalidInput(String),

    /// The motion cue produced an empty (or full) localization in every
    /// frame, so there is nothing to initialize the segmentation from.
    #[error("no motion evidence: inside-outside map is empty or full in every frame")]
    NoMotionEvidence,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn image(path: impl AsRef<Path>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}
