use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{non_empty, FieldError, HeadlineSet, Record};
use crate::style::{classify_style, StyleLexicon, STYLE_COUNT};
use crate::textmetrics::{
    avg_pairwise_cosine, distinct_n, pair_bleu, rouge_l, rouge_n, self_bleu, tokenize, BleuConfig,
    EmbeddingProvider, MetricError, Smoothing, TokenSeq,
};

/// Report columns in table order.
pub const METRIC_NAMES: [&str; 11] = [
    "pair_bleu",
    "self_bleu",
    "distinct_ngram",
    "cos_sim",
    "style_cov",
    "style_cov_pooled",
    "rouge1",
    "rouge2",
    "rougeL",
    "nli",
    "set_count",
];

/// Lower is better for these; higher is better for the rest.
const LOWER_IS_BETTER: [&str; 3] = ["pair_bleu", "self_bleu", "cos_sim"];

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub bleu: BleuConfig,
    pub lexicon: StyleLexicon,
    /// Human-readable name of the embedding provider, stamped into the report.
    pub embedding_label: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bleu: BleuConfig::default(),
            lexicon: StyleLexicon::default(),
            embedding_label: "hashed-char-bigram".into(),
        }
    }
}

/// Precomputed entailment score for one generated headline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliScore {
    pub ad_id: String,
    pub headline: String,
    pub score: f64,
}

impl Record for NliScore {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("ad_id", &self.ad_id)?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(FieldError::new("score", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct NliScores(HashMap<(String, String), f64>);

impl NliScores {
    pub fn new(entries: impl IntoIterator<Item = NliScore>) -> Self {
        Self(
            entries
                .into_iter()
                .map(|e| ((e.ad_id, e.headline), e.score))
                .collect(),
        )
    }

    pub fn get(&self, ad_id: &str, headline: &str) -> Option<f64> {
        self.0
            .get(&(ad_id.to_owned(), headline.to_owned()))
            .copied()
    }
}

/// Diversity and quality metrics on a 0–100 scale. A metric that could not be
/// computed is `None` and its reason is listed in `absent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub set_count: usize,
    pub pair_bleu: Option<f64>,
    pub self_bleu: Option<f64>,
    pub distinct_ngram: Option<f64>,
    pub cos_sim: Option<f64>,
    pub style_cov: Option<f64>,
    pub style_cov_pooled: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub nli: Option<f64>,
    /// How many sets contributed to each per-set average.
    pub contributing_sets: BTreeMap<String, usize>,
    pub absent: BTreeMap<String, String>,
    pub conventions: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "pair_bleu" => self.pair_bleu,
            "self_bleu" => self.self_bleu,
            "distinct_ngram" => self.distinct_ngram,
            "cos_sim" => self.cos_sim,
            "style_cov" => self.style_cov,
            "style_cov_pooled" => self.style_cov_pooled,
            "rouge1" => self.rouge1,
            "rouge2" => self.rouge2,
            "rougeL" => self.rouge_l,
            "nli" => self.nli,
            "set_count" => Some(self.set_count as f64),
            _ => None,
        }
    }
}

/// Running mean over the sets for which a metric is defined.
#[derive(Default)]
struct Mean {
    sum: f64,
    count: usize,
    reason: Option<String>,
}

impl Mean {
    fn push(&mut self, value: Result<f64, MetricError>) -> Result<(), HarnessError> {
        match value {
            Ok(v) => {
                self.sum += v;
                self.count += 1;
            }
            // Degenerate sets leave the metric undefined rather than zero.
            Err(e @ (MetricError::TooFewItems { .. } | MetricError::NoNGrams(_))) => {
                self.reason.get_or_insert_with(|| e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn finish(
        self,
        name: &str,
        scale: f64,
        contributing: &mut BTreeMap<String, usize>,
        absent: &mut BTreeMap<String, String>,
    ) -> Option<f64> {
        contributing.insert(name.to_owned(), self.count);
        if self.count == 0 {
            let reason = self.reason.unwrap_or_else(|| "no sets".into());
            absent.insert(
                name.to_owned(),
                format!("undefined for every set: {reason}"),
            );
            None
        } else {
            Some(scale * self.sum / self.count as f64)
        }
    }
}

fn conventions(config: &EvalConfig, provider: &dyn EmbeddingProvider) -> BTreeMap<String, String> {
    let smoothing = match config.bleu.smoothing {
        Smoothing::None => "none",
        Smoothing::AddOne => "add_one",
    };
    [
        ("scale", "all metrics x100".to_owned()),
        ("blank_headlines", "ignored".to_owned()),
        (
            "bleu",
            format!("max_n={}, smoothing={smoothing}", config.bleu.max_n),
        ),
        (
            "pair_bleu",
            "mean over ordered pairs within a set".to_owned(),
        ),
        (
            "self_bleu",
            "other headlines as joint references".to_owned(),
        ),
        (
            "distinct_ngram",
            "mean of distinct-1 and distinct-2, pooled within a set, averaged over sets".to_owned(),
        ),
        (
            "cos_sim",
            format!(
                "mean pairwise cosine, {} dim {}",
                config.embedding_label,
                provider.dim()
            ),
        ),
        (
            "style_cov",
            "distinct styles / min(N, 16), averaged over sets".to_owned(),
        ),
        (
            "style_cov_pooled",
            "distinct styles / min(N, 16) over all headlines".to_owned(),
        ),
        (
            "rouge",
            "F1, single reference title per ad, averaged over all headline-reference pairs"
                .to_owned(),
        ),
        ("nli", "mean precomputed entailment score".to_owned()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

/// Diversity metrics are computed per set and averaged; ROUGE is averaged over
/// every (headline, reference title) pair; NLI only when scores are supplied.
pub fn evaluate_sets(
    generated: &[HeadlineSet],
    references: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    config: &EvalConfig,
    nli: Option<&NliScores>,
) -> Result<MetricReport, HarnessError> {
    if generated.is_empty() {
        return Err(HarnessError::NoSets);
    }
    let mut refs: HashMap<&str, TokenSeq> = HashMap::new();
    for (id, title) in references {
        if refs.insert(id.as_str(), tokenize(title)).is_some() {
            return Err(HarnessError::DuplicateReference(id.clone()));
        }
    }

    let (mut pb, mut sb, mut dn, mut cs, mut sc) = Default::default();
    let (mut r1, mut r2, mut rl) = (0.0, 0.0, 0.0);
    let mut rouge_pairs = 0usize;
    let (mut nli_sum, mut nli_count) = (0.0, 0usize);
    let mut pooled_styles = BTreeSet::new();
    let mut pooled_count = 0usize;

    for set in generated {
        let reference = refs
            .get(set.ad_id.as_str())
            .ok_or_else(|| HarnessError::MissingReference(set.ad_id.clone()))?;
        let kept: Vec<&String> = set
            .headlines
            .iter()
            .filter(|h| !h.trim().is_empty())
            .collect();
        let tokens: Vec<TokenSeq> = kept
            .iter()
            .map(|h| tokenize(h))
            .filter(|t| !t.is_empty())
            .collect();

        Mean::push(&mut pb, pair_bleu(&tokens, &config.bleu))?;
        Mean::push(&mut sb, self_bleu(&tokens, &config.bleu))?;
        Mean::push(
            &mut dn,
            distinct_n(&tokens, 1).and_then(|d1| Ok((d1 + distinct_n(&tokens, 2)?) / 2.0)),
        )?;
        Mean::push(
            &mut cs,
            avg_pairwise_cosine(&kept, provider).map(|c| c / 100.0),
        )?;

        let mut styles = BTreeSet::new();
        for h in &kept {
            styles.insert(classify_style(h, &config.lexicon)?);
        }
        if kept.is_empty() {
            Mean::push(&mut sc, Err(MetricError::TooFewItems { needed: 1, got: 0 }))?;
        } else {
            Mean::push(
                &mut sc,
                Ok(styles.len() as f64 / kept.len().min(STYLE_COUNT) as f64),
            )?;
        }
        pooled_count += kept.len();
        pooled_styles.extend(styles);

        for (h, t) in kept.iter().zip(kept.iter().map(|h| tokenize(h))) {
            r1 += rouge_n(&t, reference, 1)?.f1;
            r2 += rouge_n(&t, reference, 2)?.f1;
            rl += rouge_l(&t, reference).f1;
            rouge_pairs += 1;
            if let Some(scores) = nli {
                let s = scores
                    .get(&set.ad_id, h)
                    .ok_or_else(|| HarnessError::MissingNli {
                        ad_id: set.ad_id.clone(),
                        headline: (*h).clone(),
                    })?;
                nli_sum += s;
                nli_count += 1;
            }
        }
    }

    let mut contributing_sets = BTreeMap::new();
    let mut absent = BTreeMap::new();
    let c = &mut contributing_sets;
    let a = &mut absent;
    let pair_bleu = pb.finish("pair_bleu", 100.0, c, a);
    let self_bleu = sb.finish("self_bleu", 100.0, c, a);
    let distinct_ngram = dn.finish("distinct_ngram", 100.0, c, a);
    let cos_sim = cs.finish("cos_sim", 100.0, c, a);
    let style_cov = sc.finish("style_cov", 100.0, c, a);

    let style_cov_pooled = if pooled_count == 0 {
        absent.insert("style_cov_pooled".into(), "no non-blank headlines".into());
        None
    } else {
        Some(100.0 * pooled_styles.len() as f64 / pooled_count.min(STYLE_COUNT) as f64)
    };
    let rouge = |sum: f64, name: &str, absent: &mut BTreeMap<String, String>| {
        if rouge_pairs == 0 {
            absent.insert(name.to_owned(), "no non-blank headlines".into());
            None
        } else {
            Some(100.0 * sum / rouge_pairs as f64)
        }
    };
    let rouge1 = rouge(r1, "rouge1", &mut absent);
    let rouge2 = rouge(r2, "rouge2", &mut absent);
    let rouge_l = rouge(rl, "rougeL", &mut absent);
    let nli = match nli {
        None => {
            absent.insert(
                "nli".into(),
                "no precomputed entailment scores supplied".into(),
            );
            None
        }
        Some(_) if nli_count == 0 => {
            absent.insert("nli".into(), "no non-blank headlines".into());
            None
        }
        Some(_) => Some(100.0 * nli_sum / nli_count as f64),
    };

    Ok(MetricReport {
        set_count: generated.len(),
        pair_bleu,
        self_bleu,
        distinct_ngram,
        cos_sim,
        style_cov,
        style_cov_pooled,
        rouge1,
        rouge2,
        rouge_l,
        nli,
        contributing_sets,
        absent,
        conventions: conventions(config, provider),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Unchanged,
    /// One side is missing.
    Undefined,
}

impl Direction {
    fn arrow(self) -> &'static str {
        match self {
            Direction::Up => "↑",
            Direction::Down => "↓",
            Direction::Unchanged => "=",
            Direction::Undefined => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub metric: String,
    pub baseline: Option<f64>,
    pub variant: Option<f64>,
    /// `variant − baseline`.
    pub delta: Option<f64>,
    pub direction: Direction,
    /// Whether the change is an improvement given the metric's polarity.
    pub improved: Option<bool>,
}

/// Signed deltas `b − a` per metric. Reports must share conventions.
pub fn ablation_compare(
    a: &MetricReport,
    b: &MetricReport,
) -> Result<Vec<AblationRow>, HarnessError> {
    let keys: BTreeSet<&String> = a.conventions.keys().chain(b.conventions.keys()).collect();
    for k in keys {
        if a.conventions.get(k) != b.conventions.get(k) {
            return Err(HarnessError::ConventionMismatch(k.clone()));
        }
    }
    Ok(METRIC_NAMES
        .iter()
        .map(|&name| {
            let (x, y) = (a.get(name), b.get(name));
            let delta = x.zip(y).map(|(x, y)| y - x);
            let direction = match delta {
                None => Direction::Undefined,
                Some(d) if d > 0.0 => Direction::Up,
                Some(d) if d < 0.0 => Direction::Down,
                Some(_) => Direction::Unchanged,
            };
            let improved = match (direction, name) {
                (Direction::Undefined | Direction::Unchanged, _) | (_, "set_count") => None,
                (d, n) => Some((d == Direction::Up) != LOWER_IS_BETTER.contains(&n)),
            };
            AblationRow {
                metric: name.to_owned(),
                baseline: x,
                variant: y,
                delta,
                direction,
                improved,
            }
        })
        .collect())
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// One row per labeled report, one column per metric.
pub fn render_table(rows: &[(&str, &MetricReport)]) -> String {
    let mut table = vec![std::iter::once("model".to_owned())
        .chain(METRIC_NAMES.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()];
    for (label, report) in rows {
        let mut row = vec![label.to_string()];
        row.extend(METRIC_NAMES.iter().map(|n| match *n {
            "set_count" => report.set_count.to_string(),
            n => fmt_value(report.get(n)),
        }));
        table.push(row);
    }
    aligned(&table)
}

pub fn render_ablation(rows: &[AblationRow]) -> String {
    let mut table = vec![vec![
        "metric".to_owned(),
        "baseline".to_owned(),
        "variant".to_owned(),
        "delta".to_owned(),
        "dir".to_owned(),
    ]];
    for r in rows {
        table.push(vec![
            r.metric.clone(),
            fmt_value(r.baseline),
            fmt_value(r.variant),
            r.delta.map_or_else(|| "-".into(), |d| format!("{d:+.2}")),
            r.direction.arrow().to_owned(),
        ]);
    }
    aligned(&table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmetrics::HashedBigramProvider;

    fn set(id: &str, h: &[&str]) -> HeadlineSet {
        HeadlineSet::canonical(id, h.iter().map(|s| s.to_string()).collect(), 6)
    }

    fn eval(sets: &[HeadlineSet], refs: &[(&str, &str)]) -> Result<MetricReport, HarnessError> {
        let refs: Vec<(String, String)> = refs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        evaluate_sets(
            sets,
            &refs,
            &HashedBigramProvider::default(),
            &EvalConfig::default(),
            None,
        )
    }

    #[test]
    fn single_headline_sets_mark_absent() {
        let r = eval(
            &[set("a", &["新品跑鞋"]), set("b", &["新品跑鞋"])],
            &[("a", "x"), ("b", "y")],
        )
        .unwrap();
        assert_eq!(r.pair_bleu, None);
        assert_eq!(r.self_bleu, None);
        assert_eq!(r.cos_sim, None);
        assert!(r.absent["pair_bleu"].contains("at least 2"));
        assert!(r.absent.contains_key("nli"));
        assert_eq!(r.style_cov, Some(100.0));
        assert!(!r.conventions.is_empty());
    }

    #[test]
    fn identical_reference_scores_full_rouge() {
        let r = eval(&[set("a", &["轻量 跑鞋 上新"])], &[("a", "轻量 跑鞋 上新")]).unwrap();
        assert_eq!(
            (r.rouge1, r.rouge2, r.rouge_l),
            (Some(100.0), Some(100.0), Some(100.0))
        );
    }

    #[test]
    fn reference_ids_must_align() {
        assert!(matches!(
            eval(&[set("a", &["x"])], &[("b", "x")]),
            Err(HarnessError::MissingReference(_))
        ));
        assert!(matches!(
            eval(&[set("a", &["x"])], &[("a", "x"), ("a", "y")]),
            Err(HarnessError::DuplicateReference(_))
        ));
    }

    #[test]
    fn nli_needs_every_headline() {
        let sets = [set("a", &["x y", "z"])];
        let refs = vec![("a".to_string(), "x".to_string())];
        let p = HashedBigramProvider::default();
        let scores = NliScores::new([NliScore {
            ad_id: "a".into(),
            headline: "x y".into(),
            score: 0.5,
        }]);
        let err = evaluate_sets(&sets, &refs, &p, &EvalConfig::default(), Some(&scores));
        assert!(matches!(err, Err(HarnessError::MissingNli { .. })));
        let scores = NliScores::new([
            NliScore {
                ad_id: "a".into(),
                headline: "x y".into(),
                score: 0.5,
            },
            NliScore {
                ad_id: "a".into(),
                headline: "z".into(),
                score: 1.0,
            },
        ]);
        let r = evaluate_sets(&sets, &refs, &p, &EvalConfig::default(), Some(&scores)).unwrap();
        assert_eq!(r.nli, Some(75.0));
    }

    #[test]
    fn ablation_is_antisymmetric_and_checks_conventions() {
        let a = eval(&[set("a", &["跑鞋 上新", "羽绒 保暖？"])], &[("a", "跑鞋")]).unwrap();
        let b = eval(&[set("a", &["跑鞋 上新", "跑鞋 上新"])], &[("a", "跑鞋")]).unwrap();
        let ab = ablation_compare(&a, &b).unwrap();
        let ba = ablation_compare(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(x.delta.map(|d| -d), y.delta);
        }
        let same = ablation_compare(&a, &a).unwrap();
        assert!(same.iter().all(|r| r.delta.is_none_or(|d| d == 0.0)));
        let pb = ab.iter().find(|r| r.metric == "pair_bleu").unwrap();
        assert_eq!(pb.direction, Direction::Up);
        assert_eq!(pb.improved, Some(false));
        let mut c = b.clone();
        c.conventions.insert("bleu".into(), "other".into());
        assert!(matches!(
            ablation_compare(&a, &c),
            Err(HarnessError::ConventionMismatch(_))
        ));
        assert!(render_ablation(&ab).contains("pair_bleu"));
    }

    #[test]
    fn table_is_aligned() {
        let a = eval(&[set("a", &["跑鞋 上新", "羽绒 保暖"])], &[("a", "跑鞋")]).unwrap();
        let t = render_table(&[("full", &a), ("w/o diversity", &a)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        let w = lines[1].chars().count();
        assert!(lines.iter().all(|l| l.chars().count() == w));
    }
}
