use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore};

use super::{GenerationRequest, PipelineError};
use crate::style::{all_styles, classify_style, StyleLexicon, StyleType};

/// Literal slot marker replaced by the keyword.
pub const KEYWORD_SLOT: &str = "{kw}";

/// Keyword used to check that each template classifies to its own style.
const PROBE_KEYWORD: &str = "商品";

const DEFAULT_TEMPLATES: &str = include_str!("../../data/default_templates.txt");

/// Headline templates for every style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<StyleType, Vec<String>>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES, &StyleLexicon::default())
            .expect("bundled templates are valid")
    }
}

impl TemplateSet {
    /// Checks that all 16 styles are present, every template has a slot, and
    /// every template classifies to its own style under `lexicon`.
    pub fn new(
        templates: BTreeMap<StyleType, Vec<String>>,
        lexicon: &StyleLexicon,
    ) -> Result<Self, PipelineError> {
        for style in all_styles() {
            let list = templates.get(&style).map(Vec::as_slice).unwrap_or_default();
            if list.is_empty() {
                return Err(PipelineError::MissingTemplates(style));
            }
            for t in list {
                if !t.contains(KEYWORD_SLOT) {
                    return Err(PipelineError::Template {
                        template: t.clone(),
                        message: format!("missing {KEYWORD_SLOT} slot"),
                    });
                }
                let got = classify_style(&instantiate(t, PROBE_KEYWORD), lexicon)?;
                if got != style {
                    return Err(PipelineError::Template {
                        template: t.clone(),
                        message: format!("declared {style} but classifies as {got}"),
                    });
                }
            }
        }
        Ok(Self { templates })
    }

    /// Sectioned text: `[directness/emoji/rhetoric]` headers, one template
    /// per line, `#` comments.
    pub fn parse(text: &str, lexicon: &StyleLexicon) -> Result<Self, PipelineError> {
        let mut templates: BTreeMap<StyleType, Vec<String>> = BTreeMap::new();
        let mut current: Option<StyleType> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let style: StyleType =
                    name.trim()
                        .parse()
                        .map_err(|e| PipelineError::TemplateFile {
                            line: i + 1,
                            message: format!("{e}"),
                        })?;
                templates.entry(style).or_default();
                current = Some(style);
                continue;
            }
            let Some(style) = current else {
                return Err(PipelineError::TemplateFile {
                    line: i + 1,
                    message: "template outside of a section".into(),
                });
            };
            templates.entry(style).or_default().push(line.to_owned());
        }
        Self::new(templates, lexicon)
    }

    pub fn load(path: &Path, lexicon: &StyleLexicon) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, lexicon)
    }

    pub fn for_style(&self, style: StyleType) -> &[String] {
        self.templates
            .get(&style)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StyleType, &str)> {
        self.templates
            .iter()
            .flat_map(|(s, list)| list.iter().map(move |t| (*s, t.as_str())))
    }
}

pub fn instantiate(template: &str, keyword: &str) -> String {
    template.replace(KEYWORD_SLOT, keyword)
}

/// Picks a template of the requested style uniformly and fills in the keyword.
pub fn generate_controlled(
    request: &GenerationRequest,
    templates: &TemplateSet,
    rng: &mut dyn RngCore,
) -> Result<String, PipelineError> {
    request.validate()?;
    let list = templates.for_style(request.style);
    if list.is_empty() {
        return Err(PipelineError::MissingTemplates(request.style));
    }
    let pick = rng.gen_range(0..list.len());
    Ok(instantiate(&list[pick], &request.keyword))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::Rhetoric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_set_covers_every_style() {
        let set = TemplateSet::default();
        for s in all_styles() {
            assert!(!set.for_style(s).is_empty(), "{s}");
        }
    }

    #[test]
    fn question_template_keeps_keyword() {
        let set = TemplateSet::default();
        let style: StyleType = "direct/without_emoji/question".parse().unwrap();
        let req = GenerationRequest::new("跑鞋广告", "跑鞋", style).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = generate_controlled(&req, &set, &mut rng).unwrap();
        assert!(h.contains("跑鞋"));
        assert!(h.contains(['?', '？']));
        assert_eq!(style.rhetoric, Rhetoric::Question);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(h, generate_controlled(&req, &set, &mut rng).unwrap());
    }

    #[test]
    fn rejects_missing_style() {
        let err = TemplateSet::parse(
            "[direct/with_emoji/question]\n{kw}吗？✨\n",
            &StyleLexicon::default(),
        );
        assert!(matches!(err, Err(PipelineError::MissingTemplates(_))));
    }

    #[test]
    fn rejects_mislabeled_template() {
        let mut text = DEFAULT_TEMPLATES.to_owned();
        text.push_str("[direct/without_emoji/statement]\n{kw}超级好\n");
        let err = TemplateSet::parse(&text, &StyleLexicon::default());
        assert!(matches!(err, Err(PipelineError::Template { .. })));
    }

    #[test]
    fn rejects_template_without_slot() {
        let mut text = DEFAULT_TEMPLATES.to_owned();
        text.push_str("[direct/without_emoji/statement]\n新品\n");
        assert!(TemplateSet::parse(&text, &StyleLexicon::default()).is_err());
    }
}
