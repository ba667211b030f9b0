use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // ELF input
    #[error("not an ELF file (bad magic)")]
    NotElf,
    #[error("truncated ELF file: {0}")]
    TruncatedFile(String),
    #[error("unsupported ELF class byte {0}")]
    UnsupportedClass(u8),
    #[error("unsupported ELF data encoding byte {0}")]
    UnsupportedEncoding(u8),

    // corpus and identities
    #[error("empty function name")]
    EmptyName,
    #[error("invalid version string {0:?}")]
    InvalidVersion(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invariant violation at {address:#x}: {detail}")]
    InvariantViolation { address: u64, detail: String },
    #[error("duplicate function address {0:#x}")]
    DuplicateAddress(u64),
    #[error("malformed symbol table line {line}: {detail}")]
    SymbolTableSyntax { line: usize, detail: String },

    // shape and alignment
    #[error("empty input")]
    EmptyInput,
    #[error("functions not sorted by strictly ascending address near {0:#x}")]
    UnsortedInput(u64),
    #[error("function at {0:#x} has size 0 and cannot carry a shape")]
    ZeroSize(u64),
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("architecture mismatch: {0} vs {1}")]
    ArchMismatch(String, String),
    #[error("version mismatch: {0} vs {1}")]
    VersionMismatch(String, String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // embedding
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("no training functions for moment estimation")]
    EmptyTraining,
    #[error("vector store: {0}")]
    VectorStore(String),

    // evaluation
    #[error("truth candidate {0:#x} is not in the pool")]
    TruthNotInPool(u64),
    #[error("empty query set")]
    EmptyQuerySet,
    #[error("mean pool size must be positive")]
    ZeroPool,
    #[error("invalid cutoff k = {0}; expected 1..=10")]
    InvalidK(usize),
    #[error("leakage: {0}")]
    Leakage(String),

    // patch proxy
    #[error("binary has no functions")]
    NoFunctions,
    #[error("class {0} missing from training data")]
    MissingClass(u8),

    // index directory
    #[error("index integrity: {0}")]
    IndexIntegrity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotElf => "NotElf",
            Error::TruncatedFile(_) => "TruncatedFile",
            Error::UnsupportedClass(_) => "UnsupportedClass",
            Error::UnsupportedEncoding(_) => "UnsupportedEncoding",
            Error::EmptyName => "EmptyName",
            Error::InvalidVersion(_) => "InvalidVersion",
            Error::SchemaViolation(_) => "SchemaViolation",
            Error::InvariantViolation { .. } => "InvariantViolation",
            Error::DuplicateAddress(_) => "DuplicateAddress",
            Error::SymbolTableSyntax { .. } => "SymbolTableSyntax",
            Error::EmptyInput => "EmptyInput",
            Error::UnsortedInput(_) => "UnsortedInput",
            Error::ZeroSize(_) => "ZeroSize",
            Error::EmptyPool => "EmptyPool",
            Error::ArchMismatch(..) => "ArchMismatch",
            Error::VersionMismatch(..) => "VersionMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::EmptyTraining => "EmptyTraining",
            Error::VectorStore(_) => "VectorStore",
            Error::TruthNotInPool(_) => "TruthNotInPool",
            Error::EmptyQuerySet => "EmptyQuerySet",
            Error::ZeroPool => "ZeroPool",
            Error::InvalidK(_) => "InvalidK",
            Error::Leakage(_) => "Leakage",
            Error::NoFunctions => "NoFunctions",
            Error::MissingClass(_) => "MissingClass",
            Error::IndexIntegrity(_) => "IndexIntegrity",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.to_string(),
        }
    }
}
