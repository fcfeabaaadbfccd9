use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("index encoding error: {0}")]
    Encoding(#[from] bincode::Error),

    #[error("unknown hashtag `{0}`")]
    UnknownHashtag(String),

    #[error("unknown location `{0}`")]
    UnknownLocation(String),

    #[error("location `{id}` has invalid coordinates ({lat}, {lon})")]
    InvalidCoordinates { id: String, lat: f64, lon: f64 },

    #[error("duplicate location id `{0}`")]
    DuplicateLocation(String),

    #[error("hashtag `{hashtag}` has {uses} uses, below the threshold of {threshold}")]
    BelowThreshold {
        hashtag: String,
        uses: usize,
        threshold: usize,
    },

    #[error("source and target location are both `{0}`")]
    SameLocation(String),

    #[error("invalid bucket edges: {0}")]
    InvalidBuckets(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: model expects {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class `{0}` has no training samples")]
    EmptyClass(String),

    #[error("non-finite feature value in row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("infeasible synthetic world: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
