//! Evaluation reports over generated headline sets, ablation deltas between
//! reports, and serving-time selection of one headline per user profile.

pub mod cli;
mod report;
mod select;

pub use report::{
    ablation_compare, evaluate_sets, render_ablation, render_table, AblationRow, Direction,
    EvalConfig, MetricReport, NliScore, NliScores, METRIC_NAMES,
};
pub use select::{select_for_profile, Selection, UserProfile};

use crate::corpus::CorpusError;
use crate::style::StyleError;
use crate::textmetrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("no reference for ad {0:?}")]
    MissingReference(String),
    #[error("duplicate reference for ad {0:?}")]
    DuplicateReference(String),
    #[error("no NLI score for ad {ad_id:?}, headline {headline:?}")]
    MissingNli { ad_id: String, headline: String },
    #[error("reports use different conventions for {0:?}")]
    ConventionMismatch(String),
    #[error("headline set is empty")]
    EmptySet,
    #[error("nothing to evaluate")]
    NoSets,
    #[error("profile {0:?} has neither text nor vector")]
    EmptyProfile(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
