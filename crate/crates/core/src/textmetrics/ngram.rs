use std::collections::{BTreeMap, BTreeSet};

use super::{MetricError, TokenSeq};

/// Multiset of the n-grams of one token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    n: usize,
    counts: BTreeMap<Vec<String>, usize>,
    total: usize,
}

impl NGramCounts {
    pub fn from_tokens(tokens: &TokenSeq, n: usize) -> Result<Self, MetricError> {
        if n == 0 {
            return Err(MetricError::InvalidOrder(n));
        }
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for w in tokens.tokens().windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
            total += 1;
        }
        Ok(Self { n, counts, total })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of n-gram occurrences (with multiplicity).
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Clipped overlap: Σ min(self[g], other[g]).
    pub fn overlap(&self, other: &NGramCounts) -> usize {
        self.iter().map(|(g, c)| c.min(other.get(g))).sum()
    }
}

/// Unique n-grams divided by total n-gram occurrences, pooled over the set.
/// N-grams never span two headlines.
pub fn distinct_n(set: &[TokenSeq], n: usize) -> Result<f64, MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidOrder(n));
    }
    let mut unique: BTreeSet<&[String]> = BTreeSet::new();
    let mut total = 0usize;
    for seq in set {
        for w in seq.tokens().windows(n) {
            unique.insert(w);
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::NoNGrams(n));
    }
    Ok(unique.len() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> TokenSeq {
        TokenSeq::from_words(s)
    }

    #[test]
    fn counts_and_overlap() {
        let a = NGramCounts::from_tokens(&w("a b a b"), 2).unwrap();
        assert_eq!(a.total(), 3);
        assert_eq!(a.unique(), 2);
        assert_eq!(a.get(&["a".into(), "b".into()]), 2);
        let b = NGramCounts::from_tokens(&w("a b c"), 2).unwrap();
        assert_eq!(a.overlap(&b), 1);
    }

    #[test]
    fn distinct_examples() {
        assert_eq!(distinct_n(&[w("a b")], 1).unwrap(), 1.0);
        assert!((distinct_n(&[w("a b a")], 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(distinct_n(&[w("a b c"), w("a b c")], 1).unwrap(), 0.5);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            distinct_n(&[w("a")], 2),
            Err(MetricError::NoNGrams(2))
        ));
        assert!(matches!(distinct_n(&[], 1), Err(MetricError::NoNGrams(1))));
        assert!(matches!(
            distinct_n(&[w("a")], 0),
            Err(MetricError::InvalidOrder(0))
        ));
    }
}
