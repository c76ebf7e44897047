use std::path::PathBuf;

use crate::corpus::TopicId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
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
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("label references unknown document id `{0}`")]
    UnknownDocument(String),
    #[error("unknown topic id `{0}`")]
    UnknownTopic(String),
    #[error("segmenter command failed with status {status}: {stderr}")]
    Segmenter { status: String, stderr: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("topic {0} has no positive documents")]
    NoPositiveDocuments(TopicId),
    #[error("cross-category keyword selection needs at least 2 topics, got {0}")]
    TooFewTopics(usize),
    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature value in example {0}")]
    NonFiniteFeature(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature space is empty")]
    EmptyFeatureSpace,
    #[error("{k} folds requested but the minority class has only {minority} members")]
    TooManyFolds { k: usize, minority: usize },
    #[error("value {value} for {what} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("no trained model for topic {0}")]
    MissingModel(TopicId),
    #[error("stations without a sales record: {}", .0.join(", "))]
    MissingSales(Vec<String>),

    #[error("need more observations than variables (n = {n}, d = {d})")]
    TooFewObservations { n: usize, d: usize },
    #[error("variable `{0}` is constant")]
    ConstantVariable(String),
    #[error("non-finite value in variable `{0}`")]
    NonFiniteData(String),
    #[error("data has effective rank {rank} < {dim}")]
    RankDeficient { rank: usize, dim: usize },
    #[error("ICA did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("every row permutation leaves a zero on the diagonal")]
    NoZeroFreePermutation,
    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("connection matrix is not permutable to strictly lower-triangular form")]
    NotAcyclic,
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

    /// True for failures of a numerical routine (as opposed to bad input or usage).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::RankDeficient { .. }
                | Error::NoZeroFreePermutation
                | Error::ZeroDiagonal(_)
                | Error::NonFiniteFeature(_)
        )
    }
}
