//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented range or combination rules.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A dataset, batch, or numeric input violates a shape/content contract.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Two objects that must agree on a shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A client-selection input is malformed (duplicate or out-of-range index).
    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    /// An IDX container carries the wrong magic number.
    #[error("{}: expected IDX magic {expected}, found {found}", path.display())]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    /// An IDX container ended before its declared payload.
    #[error("{}: truncated IDX file ({detail})", path.display())]
    IdxTruncated { path: PathBuf, detail: String },

    /// Image and label files disagree on the record count.
    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// A config file failed to parse or deserialize.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
