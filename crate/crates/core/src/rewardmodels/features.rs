//! Hashed text features for the linear scorers.
//!
//! Layout of a vector of dimension `D`, with `H = (D − 4) / 2`:
//! `[0, H)` headline unigrams and bigrams, `[H, 2H)` content unigrams,
//! then four scalars (length, overlap, emoji, question mark). The whole
//! vector is L2-normalized.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::hashing::{self, DEFAULT_HASH_SEED};
use crate::textmetrics::{is_emoji, tokenize};

pub const DEFAULT_FEATURE_DIM: usize = 4096;
pub const FEATURE_SCHEMA_VERSION: u32 = 1;
pub const SCALAR_FEATURES: usize = 4;
/// Token counts are divided by this before entering the scalar block.
const LENGTH_SCALE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub dim: usize,
    pub hash_seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            dim: DEFAULT_FEATURE_DIM,
            hash_seed: DEFAULT_HASH_SEED,
        }
    }
}

impl FeatureSpec {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim < SCALAR_FEATURES + 2 {
            return Err(ModelError::Config(format!(
                "feature dimension must be at least {}",
                SCALAR_FEATURES + 2
            )));
        }
        Ok(())
    }

    fn hashed_width(&self) -> usize {
        (self.dim - SCALAR_FEATURES) / 2
    }

    /// Index of the first scalar feature.
    pub fn scalar_offset(&self) -> usize {
        self.dim - SCALAR_FEATURES
    }
}

/// Sparse storage of a fixed-length feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn from_dense(values: &[f64]) -> Result<Self, ModelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Non-zero entries in increasing index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| weights[i] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// The scalar block before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarFeatures {
    pub length: f64,
    pub overlap: f64,
    pub emoji: f64,
    pub question: f64,
}

pub fn scalar_features(content: &str, headline: &str) -> ScalarFeatures {
    let h = tokenize(headline);
    let c: HashSet<String> = tokenize(content).tokens().iter().cloned().collect();
    let overlap = if h.is_empty() {
        0.0
    } else {
        h.tokens().iter().filter(|t| c.contains(*t)).count() as f64 / h.len() as f64
    };
    ScalarFeatures {
        length: h.len() as f64 / LENGTH_SCALE,
        overlap,
        emoji: f64::from(u8::from(headline.chars().any(is_emoji))),
        question: f64::from(u8::from(headline.contains(['?', '？']))),
    }
}

pub fn extract_features(content: &str, headline: &str) -> Result<FeatureVector, ModelError> {
    extract_features_with(&FeatureSpec::default(), content, headline)
}

pub fn extract_features_with(
    spec: &FeatureSpec,
    content: &str,
    headline: &str,
) -> Result<FeatureVector, ModelError> {
    spec.validate()?;
    if headline.trim().is_empty() {
        return Err(ModelError::EmptyHeadline);
    }
    let width = spec.hashed_width();
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    let h = tokenize(headline);
    for t in h.tokens() {
        *acc.entry(hashing::bucket(spec.hash_seed, "h1", &[t], width))
            .or_default() += 1.0;
    }
    for w in h.tokens().windows(2) {
        *acc.entry(hashing::bucket(
            spec.hash_seed,
            "h2",
            &[&w[0], &w[1]],
            width,
        ))
        .or_default() += 1.0;
    }
    for t in tokenize(content).tokens() {
        *acc.entry(width + hashing::bucket(spec.hash_seed, "c1", &[t], width))
            .or_default() += 1.0;
    }
    let s = scalar_features(content, headline);
    let base = spec.scalar_offset();
    for (k, v) in [s.length, s.overlap, s.emoji, s.question]
        .into_iter()
        .enumerate()
    {
        if v != 0.0 {
            acc.insert(base + k, v);
        }
    }
    let norm = acc.values().map(|v| v * v).sum::<f64>().sqrt();
    let entries = acc
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(i, v)| (i, v / norm))
        .collect();
    Ok(FeatureVector {
        dim: spec.dim,
        entries,
    })
}
