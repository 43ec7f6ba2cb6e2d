use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which operand of a binary vector operation was at fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no annotations")]
    NoAnnotations,
    #[error("empty item_id in annotation")]
    EmptyItemId,
    #[error("duplicate item_id {0:?}")]
    DuplicateItem(String),
    #[error("tag ({category:?}, {name:?}) is not in the vocabulary")]
    UnknownTag { category: String, name: String },
    #[error("customer {customer:?} rented unknown item {item:?}")]
    UnknownItem { customer: String, item: String },

    #[error("zero-norm {side} operand")]
    ZeroNorm { side: Side },
    #[error("item {item_id:?} has a zero-norm vector")]
    ZeroNormItem { item_id: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0}")]
    InvalidInput(String),
    #[error("item ids misaligned at row {index}: {left:?} vs {right:?}")]
    Misaligned { index: usize, left: String, right: String },
    #[error("unknown item {0:?}")]
    UnknownQuery(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("degenerate tag space: every per-item correlation is undefined")]
    DegenerateTagSpace,
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not a CORREMB1 file")]
    BadMagic,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported dtype byte {0}")]
    BadDtype(u8),
    #[error("ids file has {found} entries but the matrix has {expected} rows")]
    IdCountMismatch { expected: usize, found: usize },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    IoBare(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for degenerate inputs, 1 for every other data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateTagSpace | Error::Degenerate(_) => 2,
            _ => 1,
        }
    }
}
