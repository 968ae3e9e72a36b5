use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed csv: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("row {row}, column {column}: cannot parse {value:?} as {kind}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        kind: &'static str,
    },
    #[error("row {row}, column {column}: non-finite float")]
    NonFinite { row: usize, column: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("schema file line {line}: {message}")]
    SchemaFile { line: usize, message: String },
    #[error("unknown column `{name}`{}", suggestion_suffix(.suggestion))]
    UnknownColumn {
        name: String,
        suggestion: Option<String>,
    },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("integrity violation: {0}")]
    Integrity(String),
}

pub(crate) fn suggestion_suffix(s: &Option<String>) -> String {
    match s {
        Some(s) => format!(" (did you mean `{s}`?)"),
        None => String::new(),
    }
}

/// Lexical or syntax error with its location in the query text.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub message: String,
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("duplicate alias `{0}`")]
    DuplicateAlias(String),
    #[error("non-comparable trendsets: {0}")]
    NonComparable(String),
    #[error("column `{0}` is used as a constraint or grouping column but contains nulls")]
    NullableKey(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("missing statistics for column `{0}`")]
    MissingStats(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("null value in key column `{0}`")]
    NullKey(String),
    #[error("segmentation mismatch: {0}")]
    SegmentMismatch(String),
    #[error("{0}")]
    Invalid(String),
}

/// Top-level error returned by the engine entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl Error {
    /// True for errors caused by the query text or its references rather
    /// than by execution.
    pub fn is_query_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Analyze(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
