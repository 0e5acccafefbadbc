use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("document is encrypted; decryption is not supported")]
    EncryptedUnsupported,
    #[error("malformed PDF: {0}")]
    MalformedPdf(String),
    #[error("input does not start with %PDF-")]
    NotPdf,
    #[error("unsupported stream filter {0}")]
    UnsupportedFilter(String),
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
    #[error("invalid UTF-8 at byte {offset}")]
    InvalidUtf8 { offset: usize },
}

impl ExtractError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ExtractError::EncryptedUnsupported => "ENCRYPTED_UNSUPPORTED",
            ExtractError::MalformedPdf(_) => "MALFORMED_PDF",
            ExtractError::NotPdf => "MALFORMED_PDF",
            ExtractError::UnsupportedFilter(_) => "UNSUPPORTED_FILTER",
            ExtractError::CorruptStream(_) => "CORRUPT_STREAM",
            ExtractError::InvalidUtf8 { .. } => "INVALID_UTF8",
        }
    }
}

pub type Result<T> = std::result::Result<T, ExtractError>;
