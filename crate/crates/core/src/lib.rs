//! Multi-objective rewards, diversity/quality metrics, a synthetic data
//! pipeline and a categorical GRPO trainer for generating sets of ad
//! headlines.
//!
//! Module map:
//!
//! - [`corpus`]: record types and line-delimited JSON I/O
//! - [`textmetrics`]: tokenization, BLEU variants, distinct-n, ROUGE, embeddings
//! - [`style`]: the 16-style taxonomy, rule classifier and coverage
//! - [`rewards`]: diversity, quality, CTR, quantity and format rewards
//! - [`rewardmodels`]: hashed-feature linear scorers and their trainers
//! - [`grpo`]: group-relative policy optimization over a headline bank
//! - [`pipeline`]: enrichment, keyword proposal, controlled generation, verification
//! - [`harness`]: evaluation reports, ablation deltas, serving-time selection

pub mod corpus;
pub mod grpo;
pub mod harness;
pub mod hashing;
pub mod pipeline;
pub mod rewardmodels;
pub mod rewards;
pub mod style;
pub mod textmetrics;
