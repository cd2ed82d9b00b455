//! Record types shared by every stage and their line-delimited JSON I/O.
//!
//! Each file holds one JSON object per line, UTF-8, LF endings. Unknown
//! fields are rejected and every record is checked against its invariants on
//! both read and write.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::style::StyleType;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        field: Option<String>,
        message: String,
    },
    #[error("{path}: line {line}: duplicate id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("record {index}: field `{field}`: {message}")]
    Invariant {
        index: usize,
        field: &'static str,
        message: String,
    },
    #[error("cannot split an empty corpus")]
    EmptyInput,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

/// An invariant violation on a single field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl FieldError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

/// A type that can live in a line-delimited record file.
pub trait Record: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<(), FieldError>;

    /// Identifier that must be unique within one file, if the kind has one.
    fn unique_key(&self) -> Option<&str> {
        None
    }
}

pub(crate) fn non_empty(field: &'static str, value: &str) -> Result<(), FieldError> {
    if value.trim().is_empty() {
        Err(FieldError::new(field, "must be non-empty"))
    } else {
        Ok(())
    }
}

/// One advertisement with its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdRecord {
    pub id: String,
    pub content: String,
    pub original_title: String,
    pub topics: Vec<String>,
    pub caption: String,
    pub taxonomy: String,
    pub timestamp: i64,
}

impl Record for AdRecord {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("id", &self.id)?;
        non_empty("content", &self.content)
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.id)
    }
}

/// ⟨content, keyword, style, headline⟩ training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadruple {
    pub ad_id: String,
    pub content: String,
    pub keyword: String,
    pub style: StyleType,
    pub headline: String,
}

impl Record for Quadruple {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("keyword", &self.keyword)?;
        non_empty("headline", &self.headline)
    }
}

/// The headlines produced for one ad, with the unparsed emission kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadlineSet {
    pub ad_id: String,
    pub raw_output: String,
    pub headlines: Vec<String>,
    pub target_count: usize,
}

impl HeadlineSet {
    /// Builds a set whose `raw_output` is the canonical JSON array.
    pub fn canonical(
        ad_id: impl Into<String>,
        headlines: Vec<String>,
        target_count: usize,
    ) -> Self {
        Self {
            ad_id: ad_id.into(),
            raw_output: canonical_json(&headlines),
            headlines,
            target_count,
        }
    }
}

impl Record for HeadlineSet {
    fn validate(&self) -> Result<(), FieldError> {
        if self.target_count < 1 {
            return Err(FieldError::new("target_count", "must be at least 1"));
        }
        Ok(())
    }
}

/// Canonical emission: a compact JSON array of strings, non-ASCII unescaped.
pub fn canonical_json<S: AsRef<str>>(headlines: &[S]) -> String {
    let list: Vec<&str> = headlines.iter().map(AsRef::as_ref).collect();
    serde_json::to_string(&list).expect("string lists always serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledQuality {
    pub content: String,
    pub headline: String,
    pub label: u8,
}

impl Record for LabeledQuality {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("headline", &self.headline)?;
        if self.label > 1 {
            return Err(FieldError::new("label", "must be 0 or 1"));
        }
        Ok(())
    }
}

/// A preferred (`positive`) and dispreferred (`negative`) headline for one content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtrPair {
    pub content: String,
    pub positive: String,
    pub negative: String,
}

impl Record for CtrPair {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("positive", &self.positive)?;
        non_empty("negative", &self.negative)?;
        if self.positive == self.negative {
            return Err(FieldError::new("negative", "must differ from positive"));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

/// serde_json names the offending field in backticks; pull it out.
fn field_from_message(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_owned())
}

/// Parses records from any reader; `origin` only labels errors.
pub fn parse_records<R: Record>(
    reader: impl BufRead,
    origin: &Path,
) -> Result<Vec<R>, CorpusError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(origin))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: R = serde_json::from_str(&line).map_err(|e| {
            let message = e.to_string();
            CorpusError::Schema {
                path: origin.to_owned(),
                line: lineno,
                field: field_from_message(&message),
                message,
            }
        })?;
        rec.validate().map_err(|fe| CorpusError::Schema {
            path: origin.to_owned(),
            line: lineno,
            field: Some(fe.field.to_owned()),
            message: format!("field `{}` {}", fe.field, fe.message),
        })?;
        if let Some(key) = rec.unique_key() {
            if !seen.insert(key.to_owned()) {
                return Err(CorpusError::DuplicateId {
                    path: origin.to_owned(),
                    line: lineno,
                    id: key.to_owned(),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records<R: Record>(path: &Path) -> Result<Vec<R>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_records(BufReader::new(file), path)
}

/// Validates every record, then serializes one per line.
pub fn write_records_to<R: Record>(
    records: &[R],
    mut out: impl Write,
) -> Result<usize, std::io::Error> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(records.len())
}

pub fn check_records<R: Record>(records: &[R]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (index, rec) in records.iter().enumerate() {
        rec.validate().map_err(|fe| CorpusError::Invariant {
            index,
            field: fe.field,
            message: fe.message,
        })?;
        if let Some(key) = rec.unique_key() {
            if !seen.insert(key) {
                return Err(CorpusError::Invariant {
                    index,
                    field: "id",
                    message: format!("duplicate id {key:?}"),
                });
            }
        }
    }
    Ok(())
}

pub fn write_records<R: Record>(records: &[R], path: &Path) -> Result<usize, CorpusError> {
    check_records(records)?;
    let file = File::create(path).map_err(io_err(path))?;
    write_records_to(records, BufWriter::new(file)).map_err(io_err(path))
}

/// Stable sort by timestamp; the earliest `floor(fraction · n)` records train.
pub fn split_chronological(
    records: &[AdRecord],
    train_fraction: f64,
) -> Result<(Vec<AdRecord>, Vec<AdRecord>), CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| r.timestamp);
    // the epsilon absorbs representation error such as 0.7 * 10 = 6.999…
    let cut = ((train_fraction * sorted.len() as f64) + 1e-9).floor() as usize;
    let test = sorted.split_off(cut.min(sorted.len()));
    Ok((sorted, test))
}
