use core::fmt;

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Engine errors. Every variant means "could not certify", never "false".
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// The available precision does not determine the requested quantity.
    PrecisionExhausted(String),
    SingularMatrix,
    /// A rational exponent would exceed the configured denominator cap.
    ExponentDenominatorOverflow { cap: i128 },
    /// Growing the coefficient field would exceed the degree bound.
    FieldTooSmall { needed: usize, max: usize },
    NotBT1,
    HodgeTooLarge,
    NonConvergence(String),
    NotDirectSummand,
    EnumerationIncomplete { found: usize, expected: usize },
    PairingInconsistent,
    GenerationFailed,
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PrecisionExhausted(what) => write!(f, "precision exhausted: {what}"),
            Error::SingularMatrix => write!(f, "matrix is singular at working precision"),
            Error::ExponentDenominatorOverflow { cap } => {
                write!(f, "exponent denominator exceeds cap {cap}")
            }
            Error::FieldTooSmall { needed, max } => {
                write!(f, "field extension of degree {needed} exceeds maximum {max}")
            }
            Error::NotBT1 => write!(f, "module is not of BT1 shape"),
            Error::HodgeTooLarge => write!(f, "Hodge height is not below p/(p+1)"),
            Error::NonConvergence(what) => write!(f, "fixed-point iteration failed: {what}"),
            Error::NotDirectSummand => write!(f, "submodule is not a phi-stable direct summand"),
            Error::EnumerationIncomplete { found, expected } => {
                write!(f, "found {found} certified points, expected {expected}")
            }
            Error::PairingInconsistent => write!(f, "pairing value violates its target equation"),
            Error::GenerationFailed => write!(f, "generation failed after retry bound"),
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
        }
    }
}

pub(crate) fn precision(what: &str) -> Error {
    Error::PrecisionExhausted(String::from(what))
}

impl core::error::Error for Error {}
