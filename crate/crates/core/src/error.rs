use std::path::PathBuf;

/// Errors raised by the core library.
///
/// `Invariant` marks a broken internal consistency check (a corrupt index,
/// a violated postcondition) as opposed to bad user data.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("embedding dimension mismatch at {location}: expected {expected}, found {found}")]
    DimensionMismatch {
        location: String,
        expected: usize,
        found: usize,
    },
    #[error("zero vector passed to cosine")]
    ZeroVector,
    #[error("duplicate document id `{0}`")]
    DuplicateDoc(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("unknown document id `{0}`")]
    UnknownDoc(String),
    #[error("channel `{channel}` missing on document `{doc_id}`")]
    MissingChannel { channel: String, doc_id: String },
    #[error("empty candidate list for query `{0}`")]
    EmptyCandidates(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no trainable queries (every query needs at least one relevant candidate)")]
    NoTrainableQueries,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two paired observations are required, got {0}")]
    TooFewObservations(usize),
    #[error("query id misalignment: {0}")]
    Misaligned(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors that indicate a bug or corrupted state rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
