use std::io;

use thiserror::Error;

/// Failures while reading or writing feature, bank and report files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a feature file")]
    NotAFeatureFile,
    #[error("not a bank file")]
    NotABankFile,
    #[error("unexpected end of file")]
    UnexpectedEof,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch in session {session}")]
    ChecksumMismatch { session: u32 },
    #[error("trailing bytes after end of data")]
    TrailingBytes,
    #[error("bank has no entries")]
    EmptyBank,
    #[error("malformed file: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Core(#[from] tosca_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Failures of the report writers and the experiment runner.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("reports have different stage counts ({expected} vs {found})")]
    MismatchedStages { expected: usize, found: usize },
    #[error("nothing to plot")]
    NoReports,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] tosca_core::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type ReportResult<T> = std::result::Result<T, ReportError>;
