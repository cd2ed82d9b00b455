//! Sentence-level BLEU and the set-level Pair-BLEU / Self-BLEU built on it.

use super::{MetricError, NGramCounts, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Any zero modified precision makes the score exactly 0.
    #[default]
    None,
    /// Add one to numerator and denominator for orders ≥ 2.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        // Headlines are short; orders above 2 are almost always zero.
        Self {
            max_n: 2,
            smoothing: Smoothing::None,
        }
    }
}

impl BleuConfig {
    pub fn with_max_n(max_n: usize) -> Self {
        Self {
            max_n,
            ..Self::default()
        }
    }
}

/// Precomputed n-gram tables for one sequence, orders 1..=max_n.
struct Prepared {
    len: usize,
    grams: Vec<NGramCounts>,
}

impl Prepared {
    fn new(seq: &TokenSeq, max_n: usize) -> Result<Self, MetricError> {
        let grams = (1..=max_n)
            .map(|n| NGramCounts::from_tokens(seq, n))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            len: seq.len(),
            grams,
        })
    }
}

/// Sentence BLEU with the default (unsmoothed) configuration.
pub fn bleu(
    candidate: &TokenSeq,
    references: &[TokenSeq],
    max_n: usize,
) -> Result<f64, MetricError> {
    bleu_with(candidate, references, &BleuConfig::with_max_n(max_n))
}

/// Geometric mean of clipped n-gram precisions times the brevity penalty.
///
/// Orders run from 1 to `min(max_n, |candidate|)`, so a candidate shorter
/// than `max_n` is judged on the orders it can actually have; this keeps
/// `bleu(x, [x]) == 1` for every non-empty `x`.
pub fn bleu_with(
    candidate: &TokenSeq,
    references: &[TokenSeq],
    config: &BleuConfig,
) -> Result<f64, MetricError> {
    if config.max_n == 0 {
        return Err(MetricError::InvalidOrder(0));
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let cand = Prepared::new(candidate, config.max_n)?;
    let refs = references
        .iter()
        .map(|r| Prepared::new(r, config.max_n))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Prepared> = refs.iter().collect();
    Ok(score(&cand, &refs, config))
}

fn score(cand: &Prepared, refs: &[&Prepared], config: &BleuConfig) -> f64 {
    if cand.len == 0 {
        return 0.0;
    }
    let orders = config.max_n.min(cand.len);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let grams = &cand.grams[n - 1];
        let matched: usize = grams
            .iter()
            .map(|(g, c)| {
                let max_ref = refs
                    .iter()
                    .map(|r| r.grams[n - 1].get(g))
                    .max()
                    .unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        let total = grams.total();
        let p = match config.smoothing {
            Smoothing::AddOne if n >= 2 => (matched as f64 + 1.0) / (total as f64 + 1.0),
            _ => matched as f64 / total as f64,
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let c = cand.len as f64;
    let r = closest_ref_len(cand.len, refs) as f64;
    let bp = (1.0 - r / c).min(0.0).exp();
    bp * (log_sum / orders as f64).exp()
}

/// Reference length closest to the candidate's; ties go to the shorter one.
fn closest_ref_len(c: usize, refs: &[&Prepared]) -> usize {
    refs.iter()
        .map(|r| r.len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// Mean sentence BLEU over all ordered pairs `(i, j)`, `i ≠ j`, normalized by
/// `Z = N·(N−1)`.
pub fn pair_bleu(set: &[TokenSeq], config: &BleuConfig) -> Result<f64, MetricError> {
    let prepared = prepare_set(set, config)?;
    let n = prepared.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += score(&prepared[i], &[&prepared[j]], config);
            }
        }
    }
    Ok(sum / (n * (n - 1)) as f64)
}

/// Mean over `i` of BLEU(y_i, set \ {y_i}) with the remaining headlines as
/// joint references.
pub fn self_bleu(set: &[TokenSeq], config: &BleuConfig) -> Result<f64, MetricError> {
    let prepared = prepare_set(set, config)?;
    let n = prepared.len();
    let mut sum = 0.0;
    for i in 0..n {
        let refs: Vec<&Prepared> = prepared
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| p)
            .collect();
        sum += score(&prepared[i], &refs, config);
    }
    Ok(sum / n as f64)
}

fn prepare_set(set: &[TokenSeq], config: &BleuConfig) -> Result<Vec<Prepared>, MetricError> {
    if config.max_n == 0 {
        return Err(MetricError::InvalidOrder(0));
    }
    if set.len() < 2 {
        return Err(MetricError::TooFewItems {
            needed: 2,
            got: set.len(),
        });
    }
    set.iter().map(|s| Prepared::new(s, config.max_n)).collect()
}
