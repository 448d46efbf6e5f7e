use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants are grouped by how a caller should react: structural and
/// precondition errors mean the request itself is wrong, truncation and
/// insufficient-data errors mean the finite computation could not decide.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("domain error: missing value at vertex {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("truncation reached: {0}")]
    Truncation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for outcomes that reflect the limits of a finite truncation rather
    /// than a malformed request.
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Error::Truncation(_) | Error::InsufficientData(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
