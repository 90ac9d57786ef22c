use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing input file: {0}")]
    MissingFile(String),
    #[error("invalid UTF-8 in {path} at byte offset {offset}")]
    InvalidUtf8 { path: PathBuf, offset: usize },
    #[error("malformed language tag {0:?}, expected e.g. \"eng_latn\"")]
    BadLanguageTag(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("reference side has zero size")]
    ZeroReference,
    #[error("vocabulary size {0} is too small, at least 257 entries are required")]
    VocabTooSmall(usize),
    #[error("transition point {0} is too small, at least 257 entries are required")]
    TransitionTooSmall(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown token id {0}")]
    UnknownTokenId(u32),
    #[error("operation requires a {expected} model, got {actual}")]
    WrongAlgorithm { expected: &'static str, actual: String },
    #[error("malformed model file: {0}")]
    MalformedModelFile(String),
    #[error("empty vocabulary")]
    EmptyVocab,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("observed CTCs are missing the grid endpoint {0}")]
    MissingEndpoints(usize),
    #[error("no measurement for {language} at target {target}")]
    MissingMeasurement { language: String, target: f64 },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("predictor is constant")]
    ConstantPredictor,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("empty group")]
    EmptyGroup,
    #[error("manifest error in field `{field}`: {message}")]
    ManifestError { field: String, message: String },
    #[error("missing stage output: {0}")]
    MissingStage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
