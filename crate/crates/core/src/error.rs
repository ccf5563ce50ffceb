//! Error type shared by all solver components.

use thiserror::Error;

use crate::field::Space;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field is tagged {found:?}, expected {expected:?}")]
    WrongSpace { expected: Space, found: Space },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite values at t = {time}")]
    NonFinite { time: f64 },

    #[error("snapshot schedule: {0}")]
    Schedule(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field dump: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
