use thiserror::Error;

use crate::data::Feature;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty training subsample")]
    EmptySubsample,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid {feature}: {message}")]
    InvalidFeature { feature: Feature, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no out-of-bag trees for observation {row}")]
    NoOobTrees { row: usize },
    #[error("empty weight support")]
    EmptyWeights,
    #[error("probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("both classes must be present to compute AUC")]
    SingleClass,
    #[error("k exceeds cohort size (k = {k}, n = {n})")]
    FoldsExceedCohort { k: usize, n: usize },
    #[error("no observation could be evaluated: {0}")]
    NothingToEvaluate(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("unsupported model format `{found}` (expected `{expected}`)")]
    VersionMismatch { found: String, expected: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
