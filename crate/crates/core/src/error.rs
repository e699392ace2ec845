use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GateError {
    #[error("invalid interval: lo {lo} exceeds hi {hi}")]
    InvalidInterval { lo: Box<Rational>, hi: Box<Rational> },

    #[error("inconsistent bound history at stage {stage}: lower {lo} exceeds upper {hi}")]
    InconsistentHistory {
        stage: usize,
        lo: Box<Rational>,
        hi: Box<Rational>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("hash mismatch: embedded {embedded}, computed {computed}")]
    HashMismatch { embedded: String, computed: String },

    #[error("index {index} out of range for {arity} outputs")]
    IndexOutOfRange { index: usize, arity: usize },

    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("witness does not force the claimed status")]
    WitnessRejected,

    #[error("record reference {0} does not resolve at record time")]
    UnresolvedRecordRef(String),

    #[error("unknown evidence class {0:?}")]
    UnknownClass(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("soundness violation: {0}")]
    SoundnessViolation(String),

    #[error("oracle returned no categorical verdict for {0}")]
    OracleNotTotal(String),

    #[error("challenger role {0:?} is not authorized")]
    UnauthorizedChallenger(String),

    #[error("unknown certificate {0}")]
    UnknownCertificate(String),

    #[error("no upheld challenge for query {0}")]
    NoUpheldChallenge(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for GateError {
    fn from(err: serde_json::Error) -> Self {
        GateError::Parse(err.to_string())
    }
}

impl From<std::io::Error> for GateError {
    fn from(err: std::io::Error) -> Self {
        GateError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GateError>;
