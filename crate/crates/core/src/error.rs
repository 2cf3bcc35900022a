use std::path::PathBuf;

use crate::Month;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no valid events ingested ({} malformed line(s)){}", .diagnostics.len(), format_diagnostics(.diagnostics))]
    NoEvents { diagnostics: Vec<String> },

    #[error("month must be in 1..=12, got {0}")]
    InvalidMonth(i64),

    #[error("query is empty after normalization")]
    EmptyQuery,

    #[error("duplicate query in corpus: {0:?}")]
    DuplicateQuery(String),

    #[error("query not indexed: {0:?}")]
    UnknownQuery(String),

    #[error("years {0:?} appear in more than one table; merging would double count")]
    OverlappingYears(Vec<i32>),

    #[error("month {0} has no traffic; restrict the table to months with traffic")]
    ZeroMonthTotal(Month),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("forward cache was produced by a different parameter generation")]
    StaleCache,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dataset too small: {got} targets, need at least {min}")]
    DatasetTooSmall { got: usize, min: usize },

    #[error("train/validation split left an empty {0} set")]
    DegenerateSplit(&'static str),

    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("corrupt artifact: {0}")]
    Corrupt(String),

    #[error("reports were computed on different case sets")]
    CaseSetMismatch,

    #[error("{0} must not be empty")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn format_diagnostics(diagnostics: &[String]) -> String {
    let mut out = String::new();
    for d in diagnostics.iter().take(10) {
        out.push_str("\n  ");
        out.push_str(d);
    }
    if diagnostics.len() > 10 {
        out.push_str(&format!("\n  ... and {} more", diagnostics.len() - 10));
    }
    out
}
