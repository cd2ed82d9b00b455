//! Synthetic data pipeline: enrichment of ads into quadruples, keyword
//! proposal, keyword × style controlled generation, verification and
//! supervised-dataset assembly.
//!
//! Every role that would normally be played by a language model is a trait
//! with a deterministic rule or template implementation and a file-backed
//! one that replays externally produced outputs.

mod keywords;
mod templates;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use keywords::{
    FileKeywordProposer, IdfKeywordProposer, KeywordEntry, KeywordProposal, KeywordProposer,
    StopTokens,
};
pub use templates::{generate_controlled, instantiate, TemplateSet, KEYWORD_SLOT};

use crate::corpus::{
    canonical_json, non_empty, read_records, AdRecord, CorpusError, FieldError, HeadlineSet,
    Quadruple, Record,
};
use crate::style::{all_styles, classify_style, StyleError, StyleLexicon, StyleType};
use crate::textmetrics::tokenize;

/// Keywords (and therefore headlines) per ad when not configured.
pub const DEFAULT_KEYWORDS_PER_AD: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("content must be non-empty")]
    EmptyContent,
    #[error("keyword count must be at least 1")]
    InvalidK,
    #[error("keyword must be non-empty")]
    EmptyKeyword,
    #[error("no templates for style {0}")]
    MissingTemplates(StyleType),
    #[error("template {template:?}: {message}")]
    Template { template: String, message: String },
    #[error("template file line {line}: {message}")]
    TemplateFile { line: usize, message: String },
    #[error("missing {0}")]
    MissingEntry(String),
    #[error("no headline sets to assemble")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// What the generator is asked to produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub content: String,
    pub keyword: String,
    pub style: StyleType,
}

impl GenerationRequest {
    pub fn new(
        content: impl Into<String>,
        keyword: impl Into<String>,
        style: StyleType,
    ) -> Result<Self, PipelineError> {
        let req = Self {
            content: content.into(),
            keyword: keyword.into(),
            style,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.keyword.trim().is_empty() {
            return Err(PipelineError::EmptyKeyword);
        }
        Ok(())
    }
}

impl Record for GenerationRequest {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("keyword", &self.keyword)
    }
}

pub trait HeadlineGenerator: Send + Sync {
    fn generate(
        &self,
        request: &GenerationRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, PipelineError>;
}

impl HeadlineGenerator for TemplateSet {
    fn generate(
        &self,
        request: &GenerationRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, PipelineError> {
        generate_controlled(request, self, rng)
    }
}

/// Replays headlines from quadruples, keyed by (content, keyword, style).
#[derive(Debug, Clone, Default)]
pub struct FileGenerator {
    entries: HashMap<(String, String, StyleType), String>,
}

impl FileGenerator {
    pub fn new(quadruples: impl IntoIterator<Item = Quadruple>) -> Self {
        let mut entries = HashMap::new();
        for q in quadruples {
            entries
                .entry((q.content, q.keyword, q.style))
                .or_insert(q.headline);
        }
        Self { entries }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Ok(Self::new(read_records::<Quadruple>(path)?))
    }
}

impl HeadlineGenerator for FileGenerator {
    fn generate(
        &self,
        request: &GenerationRequest,
        _rng: &mut dyn RngCore,
    ) -> Result<String, PipelineError> {
        request.validate()?;
        let key = (
            request.content.clone(),
            request.keyword.clone(),
            request.style,
        );
        self.entries.get(&key).cloned().ok_or_else(|| {
            PipelineError::MissingEntry(format!(
                "headline for keyword {:?}, style {}",
                request.keyword, request.style
            ))
        })
    }
}

/// Semantic keyword and style attached to an existing headline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub keyword: String,
    pub style: StyleType,
}

pub trait Annotator: Send + Sync {
    /// `Ok(None)` skips the record.
    fn annotate(&self, record: &AdRecord) -> Result<Option<Annotation>, PipelineError>;
}

/// Keyword: the best-ranked token of title ∪ content that occurs in the
/// title. Style: the rule classifier applied to the title.
#[derive(Debug, Clone)]
pub struct RuleAnnotator {
    proposer: IdfKeywordProposer,
    lexicon: StyleLexicon,
}

impl RuleAnnotator {
    pub fn new(proposer: IdfKeywordProposer, lexicon: StyleLexicon) -> Self {
        Self { proposer, lexicon }
    }

    /// Document frequencies taken over the title and content of every record.
    pub fn for_records(records: &[AdRecord], stop: StopTokens, lexicon: StyleLexicon) -> Self {
        let docs: Vec<String> = records.iter().map(annotation_text).collect();
        Self::new(IdfKeywordProposer::new(&docs, stop, &lexicon), lexicon)
    }
}

fn annotation_text(r: &AdRecord) -> String {
    format!("{}\n{}", r.original_title, r.content)
}

impl Annotator for RuleAnnotator {
    fn annotate(&self, record: &AdRecord) -> Result<Option<Annotation>, PipelineError> {
        if record.original_title.trim().is_empty() {
            return Ok(None);
        }
        let title = tokenize(&record.original_title);
        let keyword = self
            .proposer
            .ranked(&annotation_text(record))
            .into_iter()
            .find(|t| title.tokens().contains(t));
        let Some(keyword) = keyword else {
            return Ok(None);
        };
        let style = classify_style(&record.original_title, &self.lexicon)?;
        Ok(Some(Annotation { keyword, style }))
    }
}

/// Replays annotations from quadruples keyed by ad id.
#[derive(Debug, Clone, Default)]
pub struct FileAnnotator {
    entries: HashMap<String, Annotation>,
}

impl FileAnnotator {
    pub fn new(quadruples: impl IntoIterator<Item = Quadruple>) -> Self {
        let mut entries = HashMap::new();
        for q in quadruples {
            entries.entry(q.ad_id).or_insert(Annotation {
                keyword: q.keyword,
                style: q.style,
            });
        }
        Self { entries }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Ok(Self::new(read_records::<Quadruple>(path)?))
    }
}

impl Annotator for FileAnnotator {
    fn annotate(&self, record: &AdRecord) -> Result<Option<Annotation>, PipelineError> {
        if record.original_title.trim().is_empty() {
            return Ok(None);
        }
        Ok(self.entries.get(&record.id).cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enriched {
    pub quadruples: Vec<Quadruple>,
    pub skipped: usize,
}

/// One quadruple per annotatable record, with the original title as headline.
pub fn enrich(records: &[AdRecord], annotator: &dyn Annotator) -> Result<Enriched, PipelineError> {
    let mut quadruples = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for r in records {
        match annotator.annotate(r)? {
            Some(a) => quadruples.push(Quadruple {
                ad_id: r.id.clone(),
                content: r.content.clone(),
                keyword: a.keyword,
                style: a.style,
                headline: r.original_title.clone(),
            }),
            None => skipped += 1,
        }
    }
    Ok(Enriched {
        quadruples,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub keyword_ok: bool,
    pub style_ok: bool,
    pub passed: bool,
}

/// Keyword coverage is a contiguous token-run match; style must match the
/// rule classifier exactly.
pub fn verify(quadruple: &Quadruple, lexicon: &StyleLexicon) -> VerifierReport {
    let kw = tokenize(&quadruple.keyword);
    let keyword_ok = !kw.is_empty() && tokenize(&quadruple.headline).contains_run(&kw);
    let style_ok = classify_style(&quadruple.headline, lexicon).is_ok_and(|s| s == quadruple.style);
    VerifierReport {
        keyword_ok,
        style_ok,
        passed: keyword_ok && style_ok,
    }
}

/// Output of [`build_sets`], aligned with the input records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltSets {
    pub sets: Vec<HeadlineSet>,
    pub quadruples: Vec<Quadruple>,
    pub rejected: usize,
    pub shortfalls: usize,
}

/// Per-record RNG: one ChaCha stream per record index, so records are
/// independent of each other and of processing order.
pub fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Proposes `k` keywords per record, pairs each with a uniformly drawn
/// style, generates, verifies and keeps the passers.
pub fn build_sets(
    records: &[AdRecord],
    k: usize,
    proposer: &dyn KeywordProposer,
    generator: &dyn HeadlineGenerator,
    lexicon: &StyleLexicon,
    seed: u64,
) -> Result<BuiltSets, PipelineError> {
    if k == 0 {
        return Err(PipelineError::InvalidK);
    }
    let styles = all_styles();
    let mut out = BuiltSets {
        sets: Vec::with_capacity(records.len()),
        quadruples: Vec::new(),
        rejected: 0,
        shortfalls: 0,
    };
    for (index, record) in records.iter().enumerate() {
        let mut rng = record_rng(seed, index);
        let proposal = proposer.propose(&record.content, k)?;
        out.shortfalls += usize::from(proposal.shortfall);
        let mut headlines = Vec::with_capacity(proposal.keywords.len());
        for keyword in proposal.keywords {
            let style = styles[rng.gen_range(0..styles.len())];
            let request = GenerationRequest::new(record.content.clone(), keyword, style)?;
            let headline = generator.generate(&request, &mut rng)?;
            let quad = Quadruple {
                ad_id: record.id.clone(),
                content: record.content.clone(),
                keyword: request.keyword,
                style,
                headline,
            };
            if verify(&quad, lexicon).passed {
                headlines.push(quad.headline.clone());
                out.quadruples.push(quad);
            } else {
                out.rejected += 1;
            }
        }
        out.sets
            .push(HeadlineSet::canonical(record.id.clone(), headlines, k));
    }
    Ok(out)
}

/// One supervised example: a prompt and the target JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftExample {
    pub ad_id: String,
    pub input: String,
    pub output: String,
}

impl Record for SftExample {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("input", &self.input)?;
        non_empty("output", &self.output)
    }
}

pub fn sft_prompt(content: &str, count: usize) -> String {
    format!(
        "Write {count} diverse advertising headlines for the ad below, varying keywords and style. \
         Answer with a JSON array of strings only.\n\nAd content:\n{content}"
    )
}

/// Wraps each set's ad content in the prompt template; the target is the
/// canonical JSON array of the set's headlines.
pub fn assemble_sft_dataset(
    sets: &[HeadlineSet],
    records: &[AdRecord],
) -> Result<Vec<SftExample>, PipelineError> {
    if sets.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let by_id: HashMap<&str, &AdRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    sets.iter()
        .map(|set| {
            let record = by_id
                .get(set.ad_id.as_str())
                .ok_or_else(|| PipelineError::MissingEntry(format!("ad record {:?}", set.ad_id)))?;
            Ok(SftExample {
                ad_id: set.ad_id.clone(),
                input: sft_prompt(&record.content, set.target_count),
                output: canonical_json(&set.headlines),
            })
        })
        .collect()
}
