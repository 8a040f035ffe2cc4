use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,
    #[error("format error: {0}")]
    Format(String),
    #[error("incompatible format chain: {0}")]
    IncompatibleFormatChain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty tensor")]
    EmptyTensor,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("version mismatch: file version {found}, supported {supported}")]
    VersionMismatch { found: u16, supported: u16 },
    #[error("truncated blob: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checksum failure: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),

    #[error("nyquist violation: sampling rate {fs} Hz cannot carry a {edge} Hz band edge")]
    Nyquist { fs: f64, edge: f64 },
    #[error("unsupported direction: resampling from {from} Hz to {to} Hz")]
    UnsupportedDirection { from: f64, to: f64 },
    #[error("record too short: {len} samples, need at least {needed}")]
    RecordTooShort { len: usize, needed: usize },

    #[error("missing file {path}: {source}")]
    MissingFile { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest line {line}: {message}")]
    ManifestHeader { line: usize, message: String },
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("empty manifest")]
    EmptyManifest,
    #[error("incomplete scheme: no entry for '{0}'")]
    IncompleteScheme(String),
    #[error("zero power: efficiency is undefined")]
    ZeroPower,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
