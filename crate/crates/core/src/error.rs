//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent setup.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data (files, datasets, task plans).
    #[error("data error: {0}")]
    Data(String),

    /// Array or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A head identifier that does not exist on the network.
    #[error("unknown head '{0}'")]
    UnknownHead(String),

    /// Training produced non-finite values; the run must be aborted.
    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
