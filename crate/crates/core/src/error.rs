use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate geometry at residue {residue}: {reason}")]
    DegenerateResidue { residue: usize, reason: String },

    #[error("torsion ({0}, {1}) is not on the unit circle")]
    InvalidTorsion(f64, f64),

    #[error("invalid angular chain: {0}")]
    InvalidChain(String),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("flow time {0} is too close to zero")]
    NearZeroTime(f64),

    #[error("non-finite state produced at step {step}")]
    NonFiniteState { step: usize },

    #[error("value {value} outside of [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("distogram normalizer is {0}; no atom pairs fall under the threshold")]
    DegenerateNormalizer(i64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("residue {index} (line {line}) is missing backbone atom {missing}")]
    IncompleteResidue {
        index: usize,
        line: usize,
        missing: &'static str,
    },

    #[error("no ATOM records found for the requested chain")]
    EmptyChain,

    #[error("corrupt trajectory file at byte {offset}: {reason}")]
    CorruptFile { offset: u64, reason: String },

    #[error("unsupported trajectory format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
