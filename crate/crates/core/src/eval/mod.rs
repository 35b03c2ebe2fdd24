//! Dataset loading, sampling, verdict scoring and explanation-quality metrics.

mod agreement;
mod dataset;
mod metrics;
mod report;
mod sample;

use thiserror::Error;

use crate::label::Label;

pub use agreement::{
    krippendorff_alpha, mean_average_rank, AlphaMetric, AlphaResult, Criterion, MarEntry, MarTable, RankRow,
    RankingSheet,
};
pub use dataset::{load_dataset, DatasetFile, DatasetFormat, FieldMapping, LoadedDataset};
pub use metrics::{confusion, macro_f1, per_class_f1, Confusion};
pub use report::{
    read_predictions, score_system, ChallengeScore, CriterionReport, EvalReport, Prediction, SystemScores,
};
pub use sample::{stratified_sample, stratified_sample_per_challenge};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {gold} gold labels")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("gold label at position {0} is not SUPPORTED or NOT_SUPPORTED")]
    InvalidGold(usize),
    #[error("{path}:{line}: {message}")]
    FormatError { path: String, line: usize, message: String },
    #[error("class {label} has {available} claims, {needed} needed")]
    InsufficientClass { label: Label, needed: usize, available: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("invalid ranking sheet: {0}")]
    InvalidSheet(String),
    #[error("{0}")]
    Io(String),
}
