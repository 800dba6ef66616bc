use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core operations.
///
/// Variants carry enough context to point at the offending value; callers in
/// the IO crate add episode ids and timestamps on top.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    NonMonotonicTimestamps { track: &'static str, index: usize },
    OutOfRange { what: &'static str, t_s: f64, lo: f64, hi: f64 },
    InvalidEpisode(String),
    NonUnitQuaternion { norm: f64 },
    NotARotation { orthonormality: f64, det: f64 },
    DegenerateSixD,
    EmptyInput,
    InvalidSpec(String),
    InvalidConfig(String),
    TooShort { len: usize, needed: usize },
    EmptyCorpus(String),
    ImageTooSmall { height: usize, width: usize },
    DimensionMismatch { expected: usize, found: usize },
    NoOnset,
    InsufficientContext { available: usize, needed: usize },
    NoTaps,
    InsufficientFuture { available: usize, needed: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonMonotonicTimestamps { track, index } => {
                write!(f, "{track} timestamps not strictly increasing at index {index}")
            }
            Error::OutOfRange { what, t_s, lo, hi } => {
                write!(f, "{what} query at {t_s} s outside [{lo}, {hi}]")
            }
            Error::InvalidEpisode(msg) => write!(f, "invalid episode: {msg}"),
            Error::NonUnitQuaternion { norm } => write!(f, "quaternion norm {norm} is not 1"),
            Error::NotARotation { orthonormality, det } => {
                write!(f, "matrix is not a proper rotation (orthonormality residual {orthonormality}, det {det})")
            }
            Error::DegenerateSixD => f.write_str("6D rotation has a zero or parallel column"),
            Error::EmptyInput => f.write_str("empty input"),
            Error::InvalidSpec(msg) => write!(f, "invalid resample spec: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::TooShort { len, needed } => {
                write!(f, "input of {len} samples is shorter than the required {needed}")
            }
            Error::EmptyCorpus(label) => write!(f, "noise corpus `{label}` is empty"),
            Error::ImageTooSmall { height, width } => {
                write!(f, "image {height}x{width} is smaller than 32x32")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} rows, found {found}")
            }
            Error::NoOnset => f.write_str("no onset found in search window"),
            Error::InsufficientContext { available, needed } => {
                write!(f, "onset search needs {needed} samples of noise context, only {available} available")
            }
            Error::NoTaps => f.write_str("latency calibration needs at least one tap"),
            Error::InsufficientFuture { available, needed } => {
                write!(f, "only {available} future pose samples, action horizon needs {needed}")
            }
        }
    }
}

impl core::error::Error for Error {}
