use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not line up.
    DimensionMismatch(String),
    /// A configuration constraint is violated; the message names it.
    InvalidConfig(String),
    /// An operation was called outside of its contract.
    Contract(&'static str),
    EmptyBatch,
    /// Alignment requested before any smashed data was stored.
    EmptyStore,
    PartitionRetriesExhausted {
        attempts: usize,
    },
    /// Training produced NaN or infinity.
    NonFinite(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::EmptyBatch => f.write_str("empty batch"),
            Error::EmptyStore => f.write_str("alignment store is empty"),
            Error::PartitionRetriesExhausted { attempts } => {
                write!(
                    f,
                    "could not draw a partition with every client nonempty after {attempts} attempts"
                )
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::Error::DimensionMismatch(alloc::format!($($arg)*))
    };
}

macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::Error::InvalidConfig(alloc::format!($($arg)*))
    };
}

pub(crate) use config_err;
pub(crate) use dim_err;
