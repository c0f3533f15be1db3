use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("corpus line {line}: {msg}")]
    Corpus { line: usize, msg: String },

    #[error("no tokens survive min_freq")]
    EmptyVocabulary,

    #[error("word not in vocabulary: {0}")]
    WordNotInVocab(String),

    #[error("unknown region: {0}")]
    UnknownRegion(String),

    #[error("resolution {0} absent from document labels and region map")]
    UnknownResolution(String),

    #[error("syntactic model requires tagged corpus")]
    MissingPosTags,

    #[error("unknown metric: {0} (expected manhattan, euclidean, or cosine)")]
    UnknownMetric(String),

    #[error("vocabulary of {0} tokens too small for a coding tree (need at least 2)")]
    VocabTooSmall(usize),

    #[error("inactive sense {sense} for word {word}")]
    InactiveSense { word: String, sense: usize },

    #[error("bootstrap needs at least 2 resamples, got {0}")]
    BootstrapResamples(usize),

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("threshold fit needs at least one example of each label")]
    OneClassLexicon,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("invalid spec at {path}: {msg}")]
    InvalidSpec { path: String, msg: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn spec(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidSpec {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
