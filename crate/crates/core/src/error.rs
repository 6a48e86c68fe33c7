use thiserror::Error;

use crate::optim::FitReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Error taxonomy shared by the whole crate. The CLI maps these onto exit
/// codes: configuration errors exit 2, data/input errors exit 3, numerical
/// failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line search failed after {halvings} halvings")]
    LinesearchExhausted { halvings: u32 },

    #[error("divergence: non-finite value at update {update}")]
    Divergence {
        update: usize,
        /// Progress made before the run diverged.
        report: Box<FitReport>,
    },
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
