use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyLogits,
    InvalidDistribution,
    DimensionMismatch { expected: usize, found: usize },
    InvalidDimension(&'static str),
    InvalidParameter(&'static str),
    NoSamples,
    DegenerateVector,
    StepOutOfRange { step: usize, total: usize },
    EmptyDataset,
    LabelOutsideClassSet(u32),
    DuplicateClass(u32),
    OverlappingClasses(u32),
    EmptyBank,
    TooFewEntries,
    SplitMismatch,
    MalformedSplits(&'static str),
    UnknownMethod(String),
    MismatchedStages,
    NonFinite,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyLogits => f.write_str("empty logits"),
            Error::InvalidDistribution => f.write_str("invalid probability vector"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidDimension(what) => write!(f, "invalid dimension: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NoSamples => f.write_str("no samples"),
            Error::DegenerateVector => f.write_str("degenerate vector"),
            Error::StepOutOfRange { step, total } => {
                write!(f, "step {step} out of range 0..={total}")
            }
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::LabelOutsideClassSet(label) => {
                write!(f, "label {label} outside the class set")
            }
            Error::DuplicateClass(c) => write!(f, "duplicate class id {c}"),
            Error::OverlappingClasses(c) => write!(f, "class {c} already belongs to a session"),
            Error::EmptyBank => f.write_str("empty module bank"),
            Error::TooFewEntries => f.write_str("at least two bank entries required"),
            Error::SplitMismatch => f.write_str("split mismatch"),
            Error::MalformedSplits(why) => write!(f, "malformed splits: {why}"),
            Error::UnknownMethod(name) => write!(f, "unknown method `{name}`"),
            Error::MismatchedStages => f.write_str("reports have mismatched stage counts"),
            Error::NonFinite => f.write_str("non-finite value"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
