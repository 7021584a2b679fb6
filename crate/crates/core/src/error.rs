//! Error type shared by every module in the crate.

use std::fmt;
use std::io;

/// Errors produced while loading data, building models or solving them.
#[derive(Debug)]
pub enum Error {
    /// A file could not be read or written.
    Io(io::Error),
    /// A file was read but its contents could not be parsed.
    Parse(String),
    /// An input violated a documented invariant (dimension mismatch,
    /// negative demand, bad index, ...).
    Invalid(String),
    /// An exp() argument fell outside the safe range `[-700, 700]` while
    /// computing a choice weight; carries the offending (node, site, type)
    /// triple and the argument value.
    WeightOverflow {
        /// Demand-node id.
        node: usize,
        /// Candidate-site id.
        site: usize,
        /// Station-type id.
        station_type: usize,
        /// The exponent that overflowed.
        arg: f64,
    },
    /// A problem was too large for an exact routine; carries a size estimate
    /// so the caller can report why.
    TooLarge(String),
    /// The LP backend failed (iteration limit, numerical breakdown).
    Backend(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "i/o error: {}", e),
            Error::Parse(msg) => write!(f, "parse error: {}", msg),
            Error::Invalid(msg) => write!(f, "invalid input: {}", msg),
            Error::WeightOverflow {
                node,
                site,
                station_type,
                arg,
            } => write!(
                f,
                "choice-weight exponent {} out of range [-700, 700] \
                 at node {}, site {}, type {}",
                arg, node, site, station_type
            ),
            Error::TooLarge(msg) => write!(f, "problem too large: {}", msg),
            Error::Backend(msg) => write!(f, "lp backend: {}", msg),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
