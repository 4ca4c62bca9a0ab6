use std::fmt;

/// Failure modes when decoding a serialized sketch.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("bad magic bytes {0:?}, expected \"STRM\"")]
    BadMagic([u8; 4]),
    #[error("unsupported sketch format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated sketch: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unknown hash family code {0}")]
    UnknownFamily(u8),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

/// Names of header fields that differ between two sketches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldList(pub Vec<&'static str>);

impl fmt::Display for FieldList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(", "))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("vector norm {norm} exceeds 1; normalize the dataset into the unit ball first")]
    NormViolation { norm: f64 },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("hash code {code} out of range [0, {range})")]
    CodeOutOfRange { code: u64, range: u64 },
    #[error("sketch of {requested} bytes exceeds the memory cap of {limit} bytes")]
    Capacity { requested: u64, limit: u64 },
    #[error("sketch is empty (no inserted examples)")]
    EmptySketch,
    #[error("incompatible sketches; differing fields: {0}")]
    Incompatible(FieldList),
    #[error("sketch parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("margin {t} outside the open interval (-1, 1)")]
    Domain { t: f64 },
    #[error("optimizer diverged at iteration {iteration}: parameter norm {norm:e}")]
    Divergence { iteration: usize, norm: f64 },
    #[error("linear system is singular even after ridge regularization")]
    Singular,
    #[error("degenerate dataset: {0}")]
    DegenerateData(String),
    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::Divergence { .. } | Error::Singular => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
