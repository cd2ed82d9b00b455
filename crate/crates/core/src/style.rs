//! The 16-way headline style taxonomy, a rule-based classifier over a marker
//! lexicon, and style coverage of a headline set.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::textmetrics::{is_emoji, tokenize, TokenSeq};

#[derive(Debug, thiserror::Error)]
pub enum StyleError {
    #[error("cannot classify an empty headline")]
    EmptyHeadline,
    #[error("coverage needs at least one headline")]
    EmptySet,
    #[error("unknown style {0:?}")]
    UnknownStyle(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("lexicon section {0:?} is empty")]
    EmptySection(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directness {
    Direct,
    Indirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmojiUsage {
    WithEmoji,
    WithoutEmoji,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rhetoric {
    Question,
    Exaggeration,
    Metaphor,
    Statement,
}

impl Directness {
    pub const ALL: [Self; 2] = [Self::Direct, Self::Indirect];
    fn as_str(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Indirect => "indirect",
        }
    }
}

impl EmojiUsage {
    pub const ALL: [Self; 2] = [Self::WithEmoji, Self::WithoutEmoji];
    fn as_str(self) -> &'static str {
        match self {
            Self::WithEmoji => "with_emoji",
            Self::WithoutEmoji => "without_emoji",
        }
    }
}

impl Rhetoric {
    pub const ALL: [Self; 4] = [
        Self::Question,
        Self::Exaggeration,
        Self::Metaphor,
        Self::Statement,
    ];
    fn as_str(self) -> &'static str {
        match self {
            Self::Question => "question",
            Self::Exaggeration => "exaggeration",
            Self::Metaphor => "metaphor",
            Self::Statement => "statement",
        }
    }
}

/// One point of the directness × emoji × rhetoric grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleType {
    pub directness: Directness,
    pub emoji: EmojiUsage,
    pub rhetoric: Rhetoric,
}

pub const STYLE_COUNT: usize = 16;

impl StyleType {
    pub const fn new(directness: Directness, emoji: EmojiUsage, rhetoric: Rhetoric) -> Self {
        Self {
            directness,
            emoji,
            rhetoric,
        }
    }

    /// Position in [`all_styles`] order.
    pub fn index(self) -> usize {
        let d = self.directness as usize;
        let e = self.emoji as usize;
        let r = self.rhetoric as usize;
        d * 8 + e * 4 + r
    }
}

impl fmt::Display for StyleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.directness.as_str(),
            self.emoji.as_str(),
            self.rhetoric.as_str()
        )
    }
}

impl FromStr for StyleType {
    type Err = StyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        all_styles()
            .into_iter()
            .find(|st| st.to_string() == s.trim())
            .ok_or_else(|| StyleError::UnknownStyle(s.to_owned()))
    }
}

/// All 16 styles, ordered by directness, then emoji usage, then rhetoric.
pub fn all_styles() -> Vec<StyleType> {
    let mut out = Vec::with_capacity(STYLE_COUNT);
    for d in Directness::ALL {
        for e in EmojiUsage::ALL {
            for r in Rhetoric::ALL {
                out.push(StyleType::new(d, e, r));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Marker {
    text: String,
    tokens: TokenSeq,
}

impl Marker {
    fn new(text: &str) -> Self {
        Self {
            text: text.to_lowercase(),
            tokens: tokenize(text),
        }
    }

    /// Token-run match; markers without word content fall back to substring.
    fn matches(&self, lowered: &str, tokens: &TokenSeq) -> bool {
        if self.tokens.is_empty() {
            lowered.contains(&self.text)
        } else {
            tokens.contains_run(&self.tokens)
        }
    }
}

/// Marker lists driving [`classify_style`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleLexicon {
    exaggeration: Vec<Marker>,
    metaphor: Vec<Marker>,
    indirectness: Vec<Marker>,
}

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.txt");

impl Default for StyleLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl StyleLexicon {
    pub fn new<S: AsRef<str>>(
        exaggeration: &[S],
        metaphor: &[S],
        indirectness: &[S],
    ) -> Result<Self, StyleError> {
        fn build<S: AsRef<str>>(name: &'static str, list: &[S]) -> Result<Vec<Marker>, StyleError> {
            let out: Vec<Marker> = list
                .iter()
                .map(|s| s.as_ref().trim())
                .filter(|s| !s.is_empty())
                .map(Marker::new)
                .collect();
            if out.is_empty() || out.len() != list.len() {
                return Err(StyleError::EmptySection(name));
            }
            Ok(out)
        }
        Ok(Self {
            exaggeration: build("exaggeration", exaggeration)?,
            metaphor: build("metaphor", metaphor)?,
            indirectness: build("indirectness", indirectness)?,
        })
    }

    /// Parses the sectioned text format: `[exaggeration]`, `[metaphor]` and
    /// `[indirectness]` headers, one marker per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, StyleError> {
        let mut sections: [Vec<String>; 3] = Default::default();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(match name.trim() {
                    "exaggeration" => 0,
                    "metaphor" => 1,
                    "indirectness" => 2,
                    other => {
                        return Err(StyleError::Lexicon {
                            line: i + 1,
                            message: format!("unknown section {other:?}"),
                        })
                    }
                });
                continue;
            }
            let Some(idx) = current else {
                return Err(StyleError::Lexicon {
                    line: i + 1,
                    message: "marker outside of a section".into(),
                });
            };
            sections[idx].push(line.to_owned());
        }
        let [ex, me, ind] = sections;
        Self::new(&ex, &me, &ind)
    }

    pub fn exaggeration_markers(&self) -> impl Iterator<Item = &str> {
        self.exaggeration.iter().map(|m| m.text.as_str())
    }

    pub fn metaphor_markers(&self) -> impl Iterator<Item = &str> {
        self.metaphor.iter().map(|m| m.text.as_str())
    }

    pub fn indirectness_markers(&self) -> impl Iterator<Item = &str> {
        self.indirectness.iter().map(|m| m.text.as_str())
    }

    /// Every token that appears inside some marker. Keyword proposers avoid
    /// these so that a keyword cannot change a headline's style.
    pub fn marker_tokens(&self) -> BTreeSet<String> {
        self.exaggeration
            .iter()
            .chain(&self.metaphor)
            .chain(&self.indirectness)
            .flat_map(|m| m.tokens.tokens().iter().cloned())
            .collect()
    }
}

fn any_match(markers: &[Marker], lowered: &str, tokens: &TokenSeq) -> bool {
    markers.iter().any(|m| m.matches(lowered, tokens))
}

/// Assigns a style by fixed rule priority. Rhetoric: question mark, then
/// exaggeration, then metaphor, else statement. Emoji: any emoji codepoint.
/// Directness: indirect iff an indirectness marker matches.
pub fn classify_style(headline: &str, lexicon: &StyleLexicon) -> Result<StyleType, StyleError> {
    if headline.trim().is_empty() {
        return Err(StyleError::EmptyHeadline);
    }
    let lowered = headline.to_lowercase();
    let tokens = tokenize(headline);
    let emoji = if headline.chars().any(is_emoji) {
        EmojiUsage::WithEmoji
    } else {
        EmojiUsage::WithoutEmoji
    };
    let rhetoric = if headline.contains(['?', '？']) {
        Rhetoric::Question
    } else if any_match(&lexicon.exaggeration, &lowered, &tokens) {
        Rhetoric::Exaggeration
    } else if any_match(&lexicon.metaphor, &lowered, &tokens) {
        Rhetoric::Metaphor
    } else {
        Rhetoric::Statement
    };
    let directness = if any_match(&lexicon.indirectness, &lowered, &tokens) {
        Directness::Indirect
    } else {
        Directness::Direct
    };
    Ok(StyleType::new(directness, emoji, rhetoric))
}

/// Distinct styles present in a set.
pub fn distinct_styles<S: AsRef<str>>(
    set: &[S],
    lexicon: &StyleLexicon,
) -> Result<BTreeSet<StyleType>, StyleError> {
    set.iter()
        .map(|h| classify_style(h.as_ref(), lexicon))
        .collect()
}

/// Distinct classified styles divided by `min(N, 16)`.
pub fn coverage<S: AsRef<str>>(set: &[S], lexicon: &StyleLexicon) -> Result<f64, StyleError> {
    if set.is_empty() {
        return Err(StyleError::EmptySet);
    }
    let distinct = distinct_styles(set, lexicon)?.len();
    Ok(distinct as f64 / set.len().min(STYLE_COUNT) as f64)
}
