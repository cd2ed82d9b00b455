use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{non_empty, read_records, FieldError, Record};
use crate::style::StyleLexicon;
use crate::textmetrics::{is_emoji, tokenize};

const DEFAULT_STOP_TOKENS: &str = include_str!("../../data/stop_tokens.txt");

/// Tokens that are never proposed as keywords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopTokens(BTreeSet<String>);

impl Default for StopTokens {
    fn default() -> Self {
        Self::parse(DEFAULT_STOP_TOKENS)
    }
}

impl StopTokens {
    /// One token per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Keywords proposed for one piece of content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordProposal {
    pub keywords: Vec<String>,
    /// Set when fewer than the requested number of eligible tokens existed.
    pub shortfall: bool,
}

pub trait KeywordProposer: Send + Sync {
    fn propose(&self, content: &str, k: usize) -> Result<KeywordProposal, PipelineError>;
}

/// Ranks content tokens by corpus document frequency, rarest first.
///
/// Stop tokens, lexicon marker tokens, emoji and pure digit runs are
/// ineligible, so a keyword can never alter the style of a headline it is
/// placed into.
#[derive(Debug, Clone)]
pub struct IdfKeywordProposer {
    doc_freq: HashMap<String, usize>,
    documents: usize,
    excluded: BTreeSet<String>,
    stop: StopTokens,
}

impl IdfKeywordProposer {
    pub fn new<S: AsRef<str>>(documents: &[S], stop: StopTokens, lexicon: &StyleLexicon) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in documents {
            let unique: BTreeSet<String> =
                tokenize(doc.as_ref()).tokens().iter().cloned().collect();
            for t in unique {
                *doc_freq.entry(t).or_default() += 1;
            }
        }
        Self {
            doc_freq,
            documents: documents.len(),
            excluded: lexicon.marker_tokens(),
            stop,
        }
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency, `ln((1 + D) / (1 + df)) + 1`.
    pub fn idf(&self, token: &str) -> f64 {
        ((1 + self.documents) as f64 / (1 + self.doc_freq(token)) as f64).ln() + 1.0
    }

    pub fn is_eligible(&self, token: &str) -> bool {
        !self.stop.contains(token)
            && !self.excluded.contains(token)
            && !token.chars().all(|c| c.is_ascii_digit())
            && !token.chars().any(is_emoji)
    }

    /// Every distinct eligible token of `text`, best first.
    pub fn ranked(&self, text: &str) -> Vec<String> {
        let unique: BTreeSet<String> = tokenize(text)
            .tokens()
            .iter()
            .filter(|t| self.is_eligible(t))
            .cloned()
            .collect();
        let mut ranked: Vec<String> = unique.into_iter().collect();
        // idf is monotone decreasing in df, so integer df gives an exact order.
        ranked.sort_by(|a, b| {
            self.doc_freq(a)
                .cmp(&self.doc_freq(b))
                .then_with(|| a.cmp(b))
        });
        ranked
    }
}

impl KeywordProposer for IdfKeywordProposer {
    fn propose(&self, content: &str, k: usize) -> Result<KeywordProposal, PipelineError> {
        check_request(content, k)?;
        let mut keywords = self.ranked(content);
        let shortfall = keywords.len() < k;
        keywords.truncate(k);
        Ok(KeywordProposal {
            keywords,
            shortfall,
        })
    }
}

fn check_request(content: &str, k: usize) -> Result<(), PipelineError> {
    if content.trim().is_empty() {
        return Err(PipelineError::EmptyContent);
    }
    if k == 0 {
        return Err(PipelineError::InvalidK);
    }
    Ok(())
}

/// Externally produced keyword lists, one line per content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordEntry {
    pub content: String,
    pub keywords: Vec<String>,
}

impl Record for KeywordEntry {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("content", &self.content)?;
        if self.keywords.iter().any(|k| k.trim().is_empty()) {
            return Err(FieldError::new("keywords", "keywords must be non-empty"));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.content)
    }
}

/// Serves keyword lists read from a file, keyed by exact content.
#[derive(Debug, Clone, Default)]
pub struct FileKeywordProposer {
    entries: HashMap<String, Vec<String>>,
}

impl FileKeywordProposer {
    pub fn new(entries: impl IntoIterator<Item = KeywordEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.content, e.keywords))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Ok(Self::new(read_records::<KeywordEntry>(path)?))
    }
}

impl KeywordProposer for FileKeywordProposer {
    fn propose(&self, content: &str, k: usize) -> Result<KeywordProposal, PipelineError> {
        check_request(content, k)?;
        let listed = self.entries.get(content).ok_or_else(|| {
            PipelineError::MissingEntry(format!("keywords for content {content:?}"))
        })?;
        let mut keywords: Vec<String> = Vec::new();
        for kw in listed {
            if !keywords.contains(kw) {
                keywords.push(kw.clone());
            }
        }
        let shortfall = keywords.len() < k;
        keywords.truncate(k);
        Ok(KeywordProposal {
            keywords,
            shortfall,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proposer(docs: &[&str]) -> IdfKeywordProposer {
        IdfKeywordProposer::new(docs, StopTokens::default(), &StyleLexicon::default())
    }

    #[test]
    fn rare_token_ranks_first() {
        let p = proposer(&["跑鞋 轻便 透气", "轻便 透气 背包", "透气 帐篷 zephyr"]);
        let out = p.propose("透气 轻便 zephyr", 3).unwrap();
        assert_eq!(out.keywords, vec!["zephyr", "便", "轻"]);
        assert!(!out.shortfall);
    }

    #[test]
    fn ties_are_lexicographic_and_repeatable() {
        let p = proposer(&[]);
        let a = p.propose("gamma alpha beta", 3).unwrap();
        assert_eq!(a.keywords, vec!["alpha", "beta", "gamma"]);
        assert_eq!(a, p.propose("gamma alpha beta", 3).unwrap());
    }

    #[test]
    fn shortfall_when_not_enough_tokens() {
        let p = proposer(&[]);
        let out = p.propose("the alpha of 2024 🎉", 6).unwrap();
        assert_eq!(out.keywords, vec!["alpha"]);
        assert!(out.shortfall);
    }

    #[test]
    fn marker_tokens_are_never_proposed() {
        let p = proposer(&[]);
        let out = p.propose("最好 像 maybe 鞋", 5).unwrap();
        assert_eq!(out.keywords, vec!["鞋"]);
    }

    #[test]
    fn rejects_bad_requests() {
        let p = proposer(&[]);
        assert!(matches!(
            p.propose("  ", 1),
            Err(PipelineError::EmptyContent)
        ));
        assert!(matches!(p.propose("x", 0), Err(PipelineError::InvalidK)));
    }

    #[test]
    fn file_proposer_dedups_and_truncates() {
        let p = FileKeywordProposer::new([KeywordEntry {
            content: "c".into(),
            keywords: vec!["a".into(), "b".into(), "a".into(), "c".into()],
        }]);
        assert_eq!(p.propose("c", 2).unwrap().keywords, vec!["a", "b"]);
        assert!(p.propose("c", 4).unwrap().shortfall);
        assert!(p.propose("other", 1).is_err());
    }
}
