//! Command-line front end: evaluate queries, check certificates, replay the
//! bundled scenarios, file challenges and verify history logs.
//!
//! Exit codes: 0 success, 1 semantic failure (rejection, mismatch, invalid
//! log), 2 configuration or input errors, 64 usage errors.

pub mod builtin;
pub mod commands;
pub mod scenario;

use gate_core::GateError;
use thiserror::Error;

pub use commands::{run, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Gate(#[from] GateError),

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_CONFIG,
            CliError::Gate(e) => match e {
                GateError::UnauthorizedChallenger(_)
                | GateError::UnknownCertificate(_)
                | GateError::NoUpheldChallenge(_)
                | GateError::WitnessRejected
                | GateError::UnresolvedRecordRef(_)
                | GateError::SoundnessViolation(_)
                | GateError::OracleNotTotal(_)
                | GateError::InconsistentHistory { .. }
                | GateError::InvalidInterval { .. } => EXIT_SEMANTIC,
                _ => EXIT_CONFIG,
            },
        }
    }
}
