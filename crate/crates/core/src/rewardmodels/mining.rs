use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::{non_empty, CtrPair, FieldError, Record};

pub const DEFAULT_MARGIN: f64 = 0.3;

/// One logged headline exposure aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionLog {
    pub content: String,
    pub headline: String,
    pub impressions: u64,
    pub clicks: u64,
}

impl Record for InteractionLog {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("headline", &self.headline)?;
        if self.impressions == 0 {
            return Err(FieldError::new("impressions", "must be positive"));
        }
        if self.clicks > self.impressions {
            return Err(FieldError::new("clicks", "cannot exceed impressions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedPairs {
    pub pairs: Vec<CtrPair>,
    /// Contents dropped for having fewer than three distinct headlines.
    pub skipped_contents: usize,
}

/// Per content, ranks headlines by CTR and pairs every top-third headline
/// with every bottom-third one; the middle third is discarded.
///
/// Repeated (content, headline) rows are merged by summing counts. Ties are
/// ranked by headline in lexicographic order, and a pair whose two CTRs are
/// equal is dropped so that every positive strictly out-clicks its negative.
/// Contents appear in first-seen order.
pub fn mine_ctr_pairs(logs: &[InteractionLog]) -> Result<MinedPairs, ModelError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, BTreeMap<&str, (u64, u64)>> = BTreeMap::new();
    for (index, log) in logs.iter().enumerate() {
        log.validate().map_err(|e| ModelError::Log {
            index,
            message: format!("field `{}` {}", e.field, e.message),
        })?;
        let entry = grouped.entry(&log.content).or_insert_with(|| {
            order.push(&log.content);
            BTreeMap::new()
        });
        let slot = entry.entry(&log.headline).or_insert((0, 0));
        slot.0 += log.impressions;
        slot.1 += log.clicks;
    }

    let mut pairs = Vec::new();
    let mut skipped_contents = 0;
    for content in order {
        let heads = &grouped[content];
        if heads.len() < 3 {
            skipped_contents += 1;
            continue;
        }
        let mut ranked: Vec<(&str, f64)> = heads
            .iter()
            .map(|(h, &(imp, clk))| (*h, clk as f64 / imp as f64))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let third = ranked.len() / 3;
        let top = &ranked[..third];
        let bottom = &ranked[ranked.len() - third..];
        for (pos, pos_ctr) in top {
            for (neg, neg_ctr) in bottom {
                if pos_ctr > neg_ctr {
                    pairs.push(CtrPair {
                        content: content.to_owned(),
                        positive: (*pos).to_owned(),
                        negative: (*neg).to_owned(),
                    });
                }
            }
        }
    }
    Ok(MinedPairs {
        pairs,
        skipped_contents,
    })
}

/// `(1/N) Σ max(0, margin − s⁺ᵢ + s⁻ᵢ)` over `N` pairs.
pub fn margin_loss(pos_scores: &[f64], neg_scores: &[f64], margin: f64) -> Result<f64, ModelError> {
    if pos_scores.len() != neg_scores.len() {
        return Err(ModelError::LengthMismatch {
            pos: pos_scores.len(),
            neg: neg_scores.len(),
        });
    }
    if pos_scores.is_empty() {
        return Err(ModelError::NoPairs);
    }
    let pair_count = pos_scores.len() as f64;
    let total: f64 = pos_scores
        .iter()
        .zip(neg_scores)
        .map(|(p, n)| (margin - (p - n)).max(0.0))
        .sum();
    Ok(total / pair_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(content: &str, headline: &str, clicks: u64) -> InteractionLog {
        InteractionLog {
            content: content.into(),
            headline: headline.into(),
            impressions: 100,
            clicks,
        }
    }

    #[test]
    fn six_headline_thirds() {
        let logs: Vec<_> = [30, 25, 20, 15, 10, 5]
            .iter()
            .enumerate()
            .map(|(i, &c)| log("x", &format!("h{i}"), c))
            .collect();
        let mined = mine_ctr_pairs(&logs).unwrap();
        assert_eq!(mined.pairs.len(), 4);
        let pos: Vec<&str> = mined.pairs.iter().map(|p| p.positive.as_str()).collect();
        let neg: Vec<&str> = mined.pairs.iter().map(|p| p.negative.as_str()).collect();
        assert_eq!(pos, ["h0", "h0", "h1", "h1"]);
        assert_eq!(neg, ["h4", "h5", "h4", "h5"]);
    }

    #[test]
    fn three_headlines_one_pair_and_skips() {
        let logs = vec![
            log("a", "p", 9),
            log("a", "m", 5),
            log("a", "n", 1),
            log("b", "only", 3),
            log("b", "two", 2),
        ];
        let mined = mine_ctr_pairs(&logs).unwrap();
        assert_eq!(mined.pairs.len(), 1);
        assert_eq!(
            (
                mined.pairs[0].positive.as_str(),
                mined.pairs[0].negative.as_str()
            ),
            ("p", "n")
        );
        assert_eq!(mined.skipped_contents, 1);
    }

    #[test]
    fn boundary_ties_break_lexicographically() {
        // "b" and "c" tie at the top boundary; "b" sorts first and wins the slot.
        let logs = vec![
            log("x", "c", 10),
            log("x", "b", 10),
            log("x", "d", 5),
            log("x", "e", 5),
            log("x", "a", 1),
            log("x", "f", 0),
        ];
        let mined = mine_ctr_pairs(&logs).unwrap();
        let pos: Vec<&str> = mined.pairs.iter().map(|p| p.positive.as_str()).collect();
        assert!(pos.iter().all(|p| *p == "b" || *p == "c"));
        let logs = vec![
            log("x", "z", 5),
            log("x", "y", 5),
            log("x", "w", 5),
            log("x", "v", 0),
        ];
        // y, w, z tie; with n = 4 the top third is one headline: "w"
        let mined = mine_ctr_pairs(&logs).unwrap();
        assert_eq!(mined.pairs[0].positive, "w");
    }

    #[test]
    fn invalid_logs_rejected() {
        let mut bad = log("x", "h", 1);
        bad.impressions = 0;
        assert!(matches!(
            mine_ctr_pairs(&[bad]),
            Err(ModelError::Log { index: 0, .. })
        ));
    }

    #[test]
    fn margin_loss_table() {
        assert_eq!(margin_loss(&[0.9], &[0.1], 0.3).unwrap(), 0.0);
        assert_eq!(margin_loss(&[0.5], &[0.45], 0.3).unwrap(), 0.25);
        assert_eq!(margin_loss(&[0.5], &[0.5], 0.3).unwrap(), 0.3);
        assert!(margin_loss(&[0.5], &[], 0.3).is_err());
        assert!(margin_loss(&[], &[], 0.3).is_err());
    }
}
