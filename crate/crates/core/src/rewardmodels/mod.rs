//! Trainable quality and CTR scorers: hashed features, a logistic linear
//! model, a binary cross-entropy trainer, a pairwise margin trainer and
//! positive/negative pair mining from interaction logs.

mod features;
mod linear;
mod mining;

pub use features::{
    extract_features, extract_features_with, scalar_features, FeatureSpec, FeatureVector,
    ScalarFeatures, DEFAULT_FEATURE_DIM, FEATURE_SCHEMA_VERSION, SCALAR_FEATURES,
};
pub use linear::{
    bce_objective, margin_objective, predict, sigmoid, train_ctr, train_quality, Gradient,
    LinearModel, LinearScorer, TrainConfig, TrainedModel,
};
pub use mining::{margin_loss, mine_ctr_pairs, InteractionLog, MinedPairs, DEFAULT_MARGIN};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("headline must be non-empty")]
    EmptyHeadline,
    #[error("dimension mismatch: model has {model}, features have {features}")]
    DimensionMismatch { model: usize, features: usize },
    #[error("non-finite value in features or parameters")]
    NonFinite,
    #[error("training data must contain both labels")]
    SingleClass,
    #[error("no training pairs")]
    EmptyPairs,
    #[error("score vectors differ in length: {pos} vs {neg}")]
    LengthMismatch { pos: usize, neg: usize },
    #[error("margin loss needs at least one pair")]
    NoPairs,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("interaction log line {index}: {message}")]
    Log { index: usize, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
