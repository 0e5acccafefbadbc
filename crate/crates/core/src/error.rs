use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid venue config: {0}")]
    InvalidConfig(String),
    #[error("entry rule {index} does not compile: {message}")]
    RuleCompileError { index: usize, message: String },
    #[error("no listing page could be fetched ({attempted} attempted)")]
    AllPagesFailed { attempted: usize },
    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("duplicate article id {0}")]
    DuplicateId(String),
    #[error("venue mismatch: {0} vs {1}")]
    VenueMismatch(String, String),
    #[error("pattern {pattern_id} does not compile at offset {offset}: {message}")]
    PatternCompileError {
        pattern_id: String,
        offset: usize,
        message: String,
    },
    #[error("pattern {pattern_id} uses {construct}, which the pattern dialect excludes")]
    DialectViolation {
        pattern_id: String,
        construct: String,
    },
    #[error("no mined paragraph {paragraph_index} for article {article_id}")]
    UnknownTarget {
        article_id: String,
        paragraph_index: usize,
    },
    #[error("label by {labeler_id} at {labeled_at} is earlier than their last label at {last}")]
    ClockSkew {
        labeler_id: String,
        labeled_at: String,
        last: String,
    },
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("report needs at least one sampled article")]
    EmptySample,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl CoreError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CoreError::InvalidConfig(_) => "INVALID_CONFIG",
            CoreError::RuleCompileError { .. } => "RULE_COMPILE_ERROR",
            CoreError::AllPagesFailed { .. } => "ALL_PAGES_FAILED",
            CoreError::MalformedRow { .. } => "MALFORMED_ROW",
            CoreError::DuplicateId(_) => "DUPLICATE_ID",
            CoreError::VenueMismatch(..) => "VENUE_MISMATCH",
            CoreError::PatternCompileError { .. } => "PATTERN_COMPILE_ERROR",
            CoreError::DialectViolation { .. } => "DIALECT_VIOLATION",
            CoreError::UnknownTarget { .. } => "UNKNOWN_TARGET",
            CoreError::ClockSkew { .. } => "CLOCK_SKEW",
            CoreError::InvalidLabel(_) => "INVALID_LABEL",
            CoreError::EmptySample => "EMPTY_SAMPLE",
            CoreError::Io { .. } => "IO_ERROR",
            CoreError::Parse { .. } => "PARSE_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CoreError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
