use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two shapes that had to agree did not.
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    /// A backward pass ran without a matching forward pass.
    InvalidState(&'static str),
    /// Wrong number of operands (bindings, models, weights, labels).
    Arity {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A caller-side precondition was violated.
    Contract(String),
    /// Parameter-shift requested for a gate it does not apply to.
    UnsupportedGate(&'static str),
    /// A class had too few records for a 3:1:1 split.
    TooSmall {
        class: &'static str,
        count: usize,
        minimum: usize,
    },
    /// A dataset or split had no samples.
    EmptyDataset,
    /// An architecture description could not be parsed.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                op,
                expected,
                actual,
            } => {
                write!(
                    f,
                    "{op}: shape mismatch, expected {expected:?}, got {actual:?}"
                )
            }
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::Arity {
                what,
                expected,
                actual,
            } => {
                write!(f, "{what}: expected {expected}, got {actual}")
            }
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::UnsupportedGate(msg) => write!(f, "unsupported gate: {msg}"),
            Error::TooSmall {
                class,
                count,
                minimum,
            } => write!(
                f,
                "class {class} has {count} records, at least {minimum} are required"
            ),
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
