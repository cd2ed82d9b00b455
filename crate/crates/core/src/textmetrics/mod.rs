//! Tokenization, n-gram statistics and the lexical/semantic similarity
//! metrics shared by the reward functions and the evaluation harness.

mod bleu;
mod embed;
mod ngram;
mod rouge;
mod tokenize;

pub use bleu::{bleu, bleu_with, pair_bleu, self_bleu, BleuConfig, Smoothing};
pub use embed::{
    avg_pairwise_cosine, cosine, EmbeddingProvider, EmbeddingVector, FileEmbeddingProvider,
    HashedBigramProvider, DEFAULT_EMBEDDING_DIM,
};
pub use ngram::{distinct_n, NGramCounts};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeScore};
pub use tokenize::{is_cjk, is_emoji, tokenize, TokenSeq};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("at least one reference is required")]
    NoReferences,
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("no {0}-grams available in the set")]
    NoNGrams(usize),
    #[error("token sequences cannot contain empty tokens")]
    EmptyToken,
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("embedding has non-finite or empty values")]
    InvalidEmbedding,
    #[error("no precomputed embedding for id {0:?}")]
    UnknownId(String),
    #[error("embedding file {path}: line {line}: {message}")]
    EmbeddingFile {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
