//! Sentence embeddings behind a provider trait, plus cosine similarity.
//!
//! The built-in provider hashes character bigrams, so similarity metrics work
//! with no external assets. [`FileEmbeddingProvider`] serves vectors computed
//! elsewhere (for example by a real sentence encoder).

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::hashing;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::InvalidEmbedding);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, MetricError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, MetricError>;
}

/// L2-normalized term frequencies of hashed character bigrams.
///
/// Bigrams are taken inside whitespace-separated chunks after lowercasing. A
/// text with no bigram falls back to its single characters, and a text with
/// no characters at all hashes a fixed sentinel, so every output has unit norm.
#[derive(Debug, Clone)]
pub struct HashedBigramProvider {
    dim: usize,
    seed: u64,
}

impl Default for HashedBigramProvider {
    fn default() -> Self {
        Self {
            dim: DEFAULT_EMBEDDING_DIM,
            seed: hashing::DEFAULT_HASH_SEED,
        }
    }
}

impl HashedBigramProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        Self { dim, seed }
    }

    /// Feature keys the text contributes before hashing.
    pub fn features(text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        let mut feats = Vec::new();
        let mut chars_seen = Vec::new();
        for chunk in lowered.split_whitespace() {
            let chars: Vec<char> = chunk.chars().collect();
            feats.extend(chars.windows(2).map(|w| w.iter().collect::<String>()));
            chars_seen.extend(chars);
        }
        if feats.is_empty() {
            feats.extend(chars_seen.iter().map(|c| c.to_string()));
        }
        if feats.is_empty() {
            feats.push("\u{0}".to_owned());
        }
        feats
    }

    pub fn bucket_of(&self, feature: &str) -> usize {
        hashing::bucket(self.seed, "bigram", &[feature], self.dim)
    }
}

impl EmbeddingProvider for HashedBigramProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, MetricError> {
        let mut values = vec![0.0; self.dim];
        for f in Self::features(text) {
            values[self.bucket_of(&f)] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        EmbeddingVector::new(values)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

/// Precomputed vectors keyed by id; `embed(text)` looks the text up as an id.
///
/// File layout: a header line `{"dim": D}` followed by one
/// `{"id": ..., "vector": [...]}` object per line.
#[derive(Debug, Clone)]
pub struct FileEmbeddingProvider {
    dim: usize,
    vectors: HashMap<String, EmbeddingVector>,
}

impl FileEmbeddingProvider {
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (String, EmbeddingVector)>,
    ) -> Result<Self, MetricError> {
        let mut vectors = HashMap::new();
        for (id, v) in entries {
            if v.dim() != dim {
                return Err(MetricError::DimensionMismatch {
                    left: dim,
                    right: v.dim(),
                });
            }
            vectors.insert(id, v);
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let file = std::fs::File::open(path)?;
        let err = |line: usize, message: String| MetricError::EmbeddingFile {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| err(1, "missing header line".into()))??;
        let header: EmbeddingHeader =
            serde_json::from_str(&header).map_err(|e| err(1, e.to_string()))?;
        if header.dim == 0 {
            return Err(err(1, "dim must be at least 1".into()));
        }
        let mut vectors = HashMap::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingLine =
                serde_json::from_str(&line).map_err(|e| err(lineno, e.to_string()))?;
            if rec.vector.len() != header.dim {
                return Err(err(
                    lineno,
                    format!(
                        "vector has {} entries, header says {}",
                        rec.vector.len(),
                        header.dim
                    ),
                ));
            }
            let v = EmbeddingVector::new(rec.vector).map_err(|e| err(lineno, e.to_string()))?;
            vectors.insert(rec.id, v);
        }
        Ok(Self {
            dim: header.dim,
            vectors,
        })
    }
}

impl EmbeddingProvider for FileEmbeddingProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, MetricError> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| MetricError::UnknownId(text.to_owned()))
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let sq = |v: &EmbeddingVector| v.values.iter().map(|x| x * x).sum::<f64>();
    let (na2, nb2) = (sq(a), sq(b));
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    // sqrt(x·x) == x exactly, so cosine(v, v) is exactly 1
    Ok((dot / (na2 * nb2).sqrt()).clamp(-1.0, 1.0))
}

/// Mean cosine over unordered pairs, on a 0–100 scale.
pub fn avg_pairwise_cosine<S: AsRef<str>>(
    set: &[S],
    provider: &dyn EmbeddingProvider,
) -> Result<f64, MetricError> {
    if set.len() < 2 {
        return Err(MetricError::TooFewItems {
            needed: 2,
            got: set.len(),
        });
    }
    let vecs = set
        .iter()
        .map(|t| provider.embed(t.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            sum += cosine(&vecs[i], &vecs[j])?;
            pairs += 1;
        }
    }
    Ok(100.0 * sum / pairs as f64)
}
