//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter violates its precondition (nonpositive radius,
    /// exponent below 1, negative heat time, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Structurally bad input: size mismatch, empty history, empty ledger.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A spectral multiplier produced a non-finite value.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// Field values became non-finite during evolution; fatal.
    #[error("numeric fatal at t={t}: {msg}")]
    NumericFatal { t: f64, msg: String },

    /// An audit needs full-field snapshots but the history retains none.
    #[error("unsupported retention: {0}")]
    UnsupportedRetention(String),

    /// Bad run configuration (unknown key, unreadable file, occupied output).
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint carries a version this build does not read.
    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    CheckpointVersion { found: u8, expected: u8 },

    /// Checkpoint failed structural validation.
    #[error("corrupt checkpoint: {0}")]
    CheckpointCorrupt(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
