use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::Error::Dimension(alloc::format!($($arg)*))
    };
}

macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::Error::Config(alloc::format!($($arg)*))
    };
}

pub(crate) use config_err;
pub(crate) use dim_err;
