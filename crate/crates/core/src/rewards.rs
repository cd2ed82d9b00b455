//! The five reward components and their composite over one model emission.
//!
//! `format` parses the emission; the remaining four are computed on the parsed
//! headlines (or on a line-based fallback when parsing fails). The composite
//! is the plain mean of the five.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, non_empty, CorpusError, FieldError, Record};
use crate::style::{coverage, StyleLexicon};
use crate::textmetrics::{pair_bleu, tokenize, BleuConfig, TokenSeq};

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("target count must be at least 1")]
    InvalidTarget,
    #[error("invalid reward config: {0}")]
    Config(String),
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScoreError),
    #[error(transparent)]
    Metric(#[from] crate::textmetrics::MetricError),
    #[error(transparent)]
    Style(#[from] crate::style::StyleError),
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("no frozen score for headline {0:?}")]
    Missing(String),
    #[error("{0}")]
    Other(String),
}

/// Anything that maps (content, headline) to a score in [0, 1].
pub trait HeadlineScorer: Send + Sync {
    fn score(&self, content: &str, headline: &str) -> Result<f64, ScoreError>;
}

/// Out-of-range and NaN scores are pulled back into [0, 1].
fn sanitize(score: f64) -> f64 {
    if score.is_nan() {
        0.0
    } else {
        score.clamp(0.0, 1.0)
    }
}

pub struct ConstantScorer(pub f64);

impl HeadlineScorer for ConstantScorer {
    fn score(&self, _: &str, _: &str) -> Result<f64, ScoreError> {
        Ok(self.0)
    }
}

/// One line of a frozen score table. `content` is optional; entries without
/// it apply to the headline under any content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenScore {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    pub headline: String,
    pub score: f64,
}

impl Record for FrozenScore {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("headline", &self.headline)?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(FieldError::new("score", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Scores injected from outside (for example a real model's outputs).
#[derive(Debug, Clone, Default)]
pub struct FrozenScorer {
    exact: HashMap<(String, String), f64>,
    any_content: HashMap<String, f64>,
}

impl FrozenScorer {
    pub fn new(entries: impl IntoIterator<Item = FrozenScore>) -> Self {
        let mut out = Self::default();
        for e in entries {
            match e.content {
                Some(c) => {
                    out.exact.insert((c, e.headline), e.score);
                }
                None => {
                    out.any_content.insert(e.headline, e.score);
                }
            }
        }
        out
    }

    pub fn from_headlines<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self::new(pairs.into_iter().map(|(h, score)| FrozenScore {
            content: None,
            headline: h.into(),
            score,
        }))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Ok(Self::new(corpus::read_records::<FrozenScore>(path)?))
    }
}

impl HeadlineScorer for FrozenScorer {
    fn score(&self, content: &str, headline: &str) -> Result<f64, ScoreError> {
        self.exact
            .get(&(content.to_owned(), headline.to_owned()))
            .or_else(|| self.any_content.get(headline))
            .copied()
            .ok_or_else(|| ScoreError::Missing(headline.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// Share of headlines scoring at or above the faithfulness threshold.
    #[default]
    ThresholdProportion,
    /// Mean score over all headlines.
    MeanScore,
}

impl std::str::FromStr for QualityMode {
    type Err = RewardError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "threshold_proportion" => Ok(Self::ThresholdProportion),
            "mean_score" => Ok(Self::MeanScore),
            other => Err(RewardError::Config(format!(
                "unknown quality_mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RewardConfig {
    pub target_count: usize,
    pub faithfulness_threshold: f64,
    pub quality_mode: QualityMode,
    pub bleu: BleuConfig,
    pub lexicon: StyleLexicon,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            target_count: 6,
            faithfulness_threshold: 0.5,
            quality_mode: QualityMode::ThresholdProportion,
            bleu: BleuConfig::default(),
            lexicon: StyleLexicon::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.target_count < 1 {
            return Err(RewardError::InvalidTarget);
        }
        if !(0.0..=1.0).contains(&self.faithfulness_threshold) {
            return Err(RewardError::Config(
                "faithfulness_threshold must lie in [0, 1]".into(),
            ));
        }
        if !(1..=4).contains(&self.bleu.max_n) {
            return Err(RewardError::Config(
                "bleu_max_n must be between 1 and 4".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Diversity,
    Quality,
    Ctr,
    Quantity,
    Format,
}

impl Component {
    pub const ALL: [Self; 5] = [
        Self::Diversity,
        Self::Quality,
        Self::Ctr,
        Self::Quantity,
        Self::Format,
    ];
}

impl std::str::FromStr for Component {
    type Err = RewardError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| RewardError::Config(format!("unknown reward component {s:?}")))
    }
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Self::Diversity => "diversity",
            Self::Quality => "quality",
            Self::Ctr => "ctr",
            Self::Quantity => "quantity",
            Self::Format => "format",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardVector {
    pub diversity: f64,
    pub quality: f64,
    pub ctr: f64,
    pub quantity: f64,
    pub format: f64,
    pub composite: f64,
}

impl RewardVector {
    pub fn from_components(
        diversity: f64,
        quality: f64,
        ctr: f64,
        quantity: f64,
        format: f64,
    ) -> Self {
        let composite = (diversity + quality + ctr + quantity + format) / 5.0;
        Self {
            diversity,
            quality,
            ctr,
            quantity,
            format,
            composite,
        }
    }

    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Diversity => self.diversity,
            Component::Quality => self.quality,
            Component::Ctr => self.ctr,
            Component::Quantity => self.quantity,
            Component::Format => self.format,
        }
    }

    /// Same components, composite re-averaged over the ones not removed.
    /// Used for ablation runs; with nothing removed it equals `self`.
    pub fn without(&self, removed: &[Component]) -> Self {
        if removed.is_empty() {
            return *self;
        }
        let kept: Vec<f64> = Component::ALL
            .into_iter()
            .filter(|c| !removed.contains(c))
            .map(|c| self.get(c))
            .collect();
        let composite = if kept.is_empty() {
            0.0
        } else {
            kept.iter().sum::<f64>() / kept.len() as f64
        };
        Self { composite, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormatOutcome {
    pub score: f64,
    pub headlines: Vec<String>,
}

/// 1 when the emission is a JSON array of non-blank strings, else 0 with a
/// lenient one-headline-per-line fallback.
pub fn format_reward(raw_output: &str) -> FormatOutcome {
    if let Ok(list) = serde_json::from_str::<Vec<String>>(raw_output) {
        if list.iter().all(|h| !h.trim().is_empty()) {
            return FormatOutcome {
                score: 1.0,
                headlines: list,
            };
        }
    }
    FormatOutcome {
        score: 0.0,
        headlines: fallback_headlines(raw_output),
    }
}

fn fallback_headlines(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|l| {
            l.trim().trim_matches(|c: char| {
                matches!(c, '[' | ']' | '{' | '}' | ',' | '"' | '\'') || c.is_whitespace()
            })
        })
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// `min(1, n / t)`.
pub fn quantity_reward(n: usize, t: usize) -> Result<f64, RewardError> {
    if t < 1 {
        return Err(RewardError::InvalidTarget);
    }
    Ok((n as f64 / t as f64).min(1.0))
}

fn usable(headlines: &[String]) -> Vec<&str> {
    headlines
        .iter()
        .map(String::as_str)
        .filter(|h| !h.trim().is_empty())
        .collect()
}

/// `(1 − PairBLEU(Y) + Coverage(Y)) / 2`.
///
/// Blank headlines carry neither tokens nor a style and are ignored. With a
/// single headline Pair-BLEU is taken as 0; an empty set scores 0.
pub fn diversity_reward(headlines: &[String], config: &RewardConfig) -> Result<f64, RewardError> {
    let set = usable(headlines);
    if set.is_empty() {
        return Ok(0.0);
    }
    let pb = if set.len() >= 2 {
        let toks: Vec<TokenSeq> = set.iter().map(|h| tokenize(h)).collect();
        pair_bleu(&toks, &config.bleu)?
    } else {
        0.0
    };
    let cov = coverage(&set, &config.lexicon)?;
    Ok(diversity_formula(pb, cov))
}

pub fn diversity_formula(pair_bleu: f64, coverage: f64) -> f64 {
    (1.0 - pair_bleu + coverage) / 2.0
}

pub fn quality_reward(
    headlines: &[String],
    content: &str,
    scorer: &dyn HeadlineScorer,
    config: &RewardConfig,
) -> Result<f64, RewardError> {
    if headlines.is_empty() {
        return Ok(0.0);
    }
    let scores = headlines
        .iter()
        .map(|h| scorer.score(content, h).map(sanitize))
        .collect::<Result<Vec<_>, _>>()?;
    let n = scores.len() as f64;
    Ok(match config.quality_mode {
        QualityMode::ThresholdProportion => {
            scores
                .iter()
                .filter(|&&s| s >= config.faithfulness_threshold)
                .count() as f64
                / n
        }
        QualityMode::MeanScore => scores.iter().sum::<f64>() / n,
    })
}

pub fn ctr_reward(
    headlines: &[String],
    content: &str,
    scorer: &dyn HeadlineScorer,
) -> Result<f64, RewardError> {
    if headlines.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for h in headlines {
        sum += sanitize(scorer.score(content, h)?);
    }
    Ok(sum / headlines.len() as f64)
}

/// The two model-based scorers the composite needs.
#[derive(Clone, Copy)]
pub struct Scorers<'a> {
    pub quality: &'a dyn HeadlineScorer,
    pub ctr: &'a dyn HeadlineScorer,
}

pub fn composite_reward(
    content: &str,
    raw_output: &str,
    scorers: Scorers<'_>,
    config: &RewardConfig,
) -> Result<RewardVector, RewardError> {
    config.validate()?;
    let FormatOutcome {
        score: format,
        headlines,
    } = format_reward(raw_output);
    let quantity = quantity_reward(headlines.len(), config.target_count)?;
    let diversity = diversity_reward(&headlines, config)?;
    let quality = quality_reward(&headlines, content, scorers.quality, config)?;
    let ctr = ctr_reward(&headlines, content, scorers.ctr)?;
    Ok(RewardVector::from_components(
        diversity, quality, ctr, quantity, format,
    ))
}

/// Owned bundle of config and scorers, optionally with components ablated.
#[derive(Clone)]
pub struct CompositeReward {
    pub config: RewardConfig,
    pub quality: Arc<dyn HeadlineScorer>,
    pub ctr: Arc<dyn HeadlineScorer>,
    pub removed: Vec<Component>,
}

impl CompositeReward {
    pub fn new(
        config: RewardConfig,
        quality: Arc<dyn HeadlineScorer>,
        ctr: Arc<dyn HeadlineScorer>,
    ) -> Self {
        Self {
            config,
            quality,
            ctr,
            removed: Vec::new(),
        }
    }

    pub fn without(mut self, component: Component) -> Self {
        if !self.removed.contains(&component) {
            self.removed.push(component);
        }
        self
    }

    pub fn evaluate(&self, content: &str, raw_output: &str) -> Result<RewardVector, RewardError> {
        let scorers = Scorers {
            quality: self.quality.as_ref(),
            ctr: self.ctr.as_ref(),
        };
        Ok(composite_reward(content, raw_output, scorers, &self.config)?.without(&self.removed))
    }
}

/// Reward output line: the ad id plus the six reward fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRecord {
    pub ad_id: String,
    pub diversity: f64,
    pub quality: f64,
    pub ctr: f64,
    pub quantity: f64,
    pub format: f64,
    pub composite: f64,
}

impl RewardRecord {
    pub fn new(ad_id: impl Into<String>, v: &RewardVector) -> Self {
        Self {
            ad_id: ad_id.into(),
            diversity: v.diversity,
            quality: v.quality,
            ctr: v.ctr,
            quantity: v.quantity,
            format: v.format,
            composite: v.composite,
        }
    }
}

impl Record for RewardRecord {
    fn validate(&self) -> Result<(), FieldError> {
        let fields = [
            ("diversity", self.diversity),
            ("quality", self.quality),
            ("ctr", self.ctr),
            ("quantity", self.quantity),
            ("format", self.format),
            ("composite", self.composite),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(FieldError::new(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    struct Fixed(Vec<f64>, std::sync::atomic::AtomicUsize);

    impl HeadlineScorer for Fixed {
        fn score(&self, _: &str, _: &str) -> Result<f64, ScoreError> {
            let i = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(self.0[i])
        }
    }

    #[test]
    fn format_cases() {
        let ok = format_reward(r#"["标题一","标题二"]"#);
        assert_eq!(ok.score, 1.0);
        assert_eq!(ok.headlines, s(&["标题一", "标题二"]));
        let broken = format_reward(r#"["标题一","#);
        assert_eq!(broken.score, 0.0);
        assert_eq!(broken.headlines, s(&["标题一"]));
        let obj = format_reward(r#"{"a":1}"#);
        assert_eq!(obj.score, 0.0);
        assert_eq!(obj.headlines, s(&["a\":1"]));
        assert_eq!(format_reward(r#"["ok",""]"#).score, 0.0);
        assert_eq!(format_reward("").headlines.len(), 0);
    }

    #[test]
    fn quantity_table() {
        assert_eq!(quantity_reward(0, 6).unwrap(), 0.0);
        assert_eq!(quantity_reward(3, 6).unwrap(), 0.5);
        assert_eq!(quantity_reward(9, 6).unwrap(), 1.0);
        assert!(quantity_reward(1, 0).is_err());
    }

    #[test]
    fn diversity_cases() {
        let cfg = RewardConfig::default();
        assert_eq!(
            diversity_reward(&s(&["真的吗？", "新品上市"]), &cfg).unwrap(),
            1.0
        );
        assert_eq!(
            diversity_reward(&s(&["新品上市", "新品上市"]), &cfg).unwrap(),
            0.25
        );
        assert_eq!(diversity_reward(&[], &cfg).unwrap(), 0.0);
        assert_eq!(diversity_reward(&s(&["一个"]), &cfg).unwrap(), 1.0);
    }

    #[test]
    fn quality_modes() {
        let h = s(&["a", "b", "c"]);
        let mut cfg = RewardConfig::default();
        let scorer = || Fixed(vec![0.8, 0.4, 0.6], Default::default());
        let t = quality_reward(&h, "x", &scorer(), &cfg).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
        cfg.quality_mode = QualityMode::MeanScore;
        let m = quality_reward(&h, "x", &scorer(), &cfg).unwrap();
        assert!((m - 0.6).abs() < 1e-15);
        assert_eq!(
            quality_reward(&h, "x", &ConstantScorer(1.0), &cfg).unwrap(),
            1.0
        );
        cfg.quality_mode = QualityMode::ThresholdProportion;
        assert_eq!(
            quality_reward(&h, "x", &ConstantScorer(1.0), &cfg).unwrap(),
            1.0
        );
        assert_eq!(
            quality_reward(&[], "x", &ConstantScorer(1.0), &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn ctr_mean_and_sanitizing() {
        let h = s(&["a", "b"]);
        assert_eq!(ctr_reward(&h, "", &ConstantScorer(0.5)).unwrap(), 0.5);
        let f = Fixed(vec![0.0, 1.0], Default::default());
        assert_eq!(ctr_reward(&h, "", &f).unwrap(), 0.5);
        assert_eq!(ctr_reward(&h, "", &ConstantScorer(f64::NAN)).unwrap(), 0.0);
        assert_eq!(ctr_reward(&h, "", &ConstantScorer(7.0)).unwrap(), 1.0);
    }

    #[test]
    fn composite_extremes() {
        let cfg = RewardConfig {
            target_count: 2,
            ..RewardConfig::default()
        };
        let one = ConstantScorer(1.0);
        let sc = Scorers {
            quality: &one,
            ctr: &one,
        };
        let v = composite_reward("c", r#"["真的吗？","新品上市"]"#, sc, &cfg).unwrap();
        assert_eq!(v, RewardVector::from_components(1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(v.composite, 1.0);
        let empty = composite_reward("c", "", sc, &cfg).unwrap();
        assert_eq!(
            empty,
            RewardVector::from_components(0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn frozen_scorer_lookup() {
        let f = FrozenScorer::new([
            FrozenScore {
                content: Some("c1".into()),
                headline: "h".into(),
                score: 0.9,
            },
            FrozenScore {
                content: None,
                headline: "h".into(),
                score: 0.1,
            },
        ]);
        assert_eq!(f.score("c1", "h").unwrap(), 0.9);
        assert_eq!(f.score("c2", "h").unwrap(), 0.1);
        assert!(matches!(f.score("c1", "zz"), Err(ScoreError::Missing(_))));
    }

    #[test]
    fn ablation_reaverages() {
        let v = RewardVector::from_components(0.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(v.without(&[Component::Diversity]).composite, 1.0);
        assert_eq!(v.without(&[]).composite, v.composite);
        assert_eq!("ctr".parse::<Component>().unwrap(), Component::Ctr);
    }
}
