//! Prompt templates that verbalise a domain label into a hypothesis.
//!
//! A template pairs a premise source (a gloss or a WSD context) with a
//! hypothesis pattern such as `{label} is the domain of {word}.`. The premise
//! and the rendered hypothesis are sent to the scorer as two segments of a
//! sentence pair.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::DomainLabel;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {id:?}: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("template {0:?} needs a {{word}} binding")]
    MissingWord(String),
    #[error("template {0:?} has no {{word}} placeholder but a word was supplied")]
    UnexpectedWord(String),
    #[error("empty premise")]
    EmptyPremise,
    #[error("empty word binding")]
    EmptyWord,
    #[error("no labels to verbalise")]
    NoLabels,
    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),
    #[error("failed to read template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad template file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseSource {
    Gloss,
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Label,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TemplateSpec", into = "TemplateSpec")]
pub struct PromptTemplate {
    id: String,
    pattern: String,
    premise_source: PremiseSource,
    segments: Vec<Segment>,
}

/// JSON shape of a user-defined template.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub id: String,
    pub hypothesis_pattern: String,
    pub premise_source: PremiseSource,
}

impl TryFrom<TemplateSpec> for PromptTemplate {
    type Error = PromptError;

    fn try_from(spec: TemplateSpec) -> Result<Self, Self::Error> {
        PromptTemplate::new(&spec.id, &spec.hypothesis_pattern, spec.premise_source)
    }
}

impl From<PromptTemplate> for TemplateSpec {
    fn from(t: PromptTemplate) -> Self {
        TemplateSpec {
            id: t.id,
            hypothesis_pattern: t.pattern,
            premise_source: t.premise_source,
        }
    }
}

pub const DOMAIN_OF_SENTENCE: &str = "The domain of the sentence is about {label}.";
pub const DOMAIN_OF_WORD: &str = "{label} is the domain of {word}.";

/// The built-in templates: `dl_sentence`, `wsd_sentence` and `wsd_word`.
pub fn builtin_templates() -> Vec<PromptTemplate> {
    vec![
        PromptTemplate::new("dl_sentence", DOMAIN_OF_SENTENCE, PremiseSource::Gloss),
        PromptTemplate::new("wsd_sentence", DOMAIN_OF_SENTENCE, PremiseSource::Context),
        PromptTemplate::new("wsd_word", DOMAIN_OF_WORD, PremiseSource::Context),
    ]
    .into_iter()
    .map(|t| t.expect("built-in templates are valid"))
    .collect()
}

/// Look up a template id among the built-ins and any extra templates.
pub fn find_template(id: &str, extra: &[PromptTemplate]) -> Result<PromptTemplate, PromptError> {
    extra
        .iter()
        .cloned()
        .chain(builtin_templates())
        .find(|t| t.id == id)
        .ok_or_else(|| PromptError::UnknownTemplate(id.into()))
}

/// Load user templates from JSON: a single object or an array of objects.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<PromptTemplate>, PromptError> {
    let text = fs::read_to_string(path)?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PromptTemplate),
        Many(Vec<PromptTemplate>),
    }
    Ok(match serde_json::from_str(&text)? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(ts) => ts,
    })
}

impl PromptTemplate {
    pub fn new(
        id: &str,
        pattern: &str,
        premise_source: PremiseSource,
    ) -> Result<Self, PromptError> {
        let invalid = |reason: String| PromptError::InvalidTemplate {
            id: id.to_string(),
            reason,
        };
        if id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        let segments = parse_pattern(pattern).map_err(invalid)?;
        let count = |s: &Segment| segments.iter().filter(|x| *x == s).count();
        if count(&Segment::Label) != 1 {
            return Err(invalid("pattern must contain {label} exactly once".into()));
        }
        if count(&Segment::Word) > 1 {
            return Err(invalid("pattern may contain {word} at most once".into()));
        }
        Ok(PromptTemplate {
            id: id.to_string(),
            pattern: pattern.to_string(),
            premise_source,
            segments,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn premise_source(&self) -> PremiseSource {
        self.premise_source
    }

    pub fn requires_word(&self) -> bool {
        self.segments.contains(&Segment::Word)
    }

    fn render(&self, label: &DomainLabel, word: Option<&str>) -> String {
        let mut out = String::with_capacity(self.pattern.len() + 32);
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Label => out.push_str(label.as_str()),
                Segment::Word => out.push_str(word.unwrap_or_default()),
            }
        }
        out
    }
}

fn parse_pattern(pattern: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut text = String::new();
    let mut rest = pattern;
    while let Some(c) = rest.chars().next() {
        match c {
            '{' => {
                let close = rest.find('}').ok_or("unclosed '{'")?;
                let seg = match &rest[1..close] {
                    "label" => Segment::Label,
                    "word" => Segment::Word,
                    other => return Err(format!("unknown placeholder {{{other}}}")),
                };
                if !text.is_empty() {
                    segments.push(Segment::Text(std::mem::take(&mut text)));
                }
                segments.push(seg);
                rest = &rest[close + 1..];
            }
            '}' => return Err("unmatched '}'".into()),
            _ => {
                text.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    if !text.is_empty() {
        segments.push(Segment::Text(text));
    }
    Ok(segments)
}

/// A rendered hypothesis for one domain label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hypothesis {
    pub text: String,
    pub domain: DomainLabel,
    pub template_id: String,
}

/// Turn a lemma into the text bound to `{word}`: underscores become spaces.
pub fn verbalize_lemma(lemma: &str) -> String {
    lemma.replace('_', " ")
}

/// Render the premise/hypothesis pair for one label. The premise is returned
/// unchanged. Bound values are trimmed, so substitution never introduces
/// doubled spaces.
pub fn render_pair(
    template: &PromptTemplate,
    premise: &str,
    label: &DomainLabel,
    word: Option<&str>,
) -> Result<(String, Hypothesis), PromptError> {
    if premise.trim().is_empty() {
        return Err(PromptError::EmptyPremise);
    }
    let hypothesis = render_hypothesis(template, label, word)?;
    Ok((premise.to_string(), hypothesis))
}

fn render_hypothesis(
    template: &PromptTemplate,
    label: &DomainLabel,
    word: Option<&str>,
) -> Result<Hypothesis, PromptError> {
    let word = match (template.requires_word(), word.map(str::trim)) {
        (true, None) => return Err(PromptError::MissingWord(template.id.clone())),
        (true, Some("")) => return Err(PromptError::EmptyWord),
        (true, w) => w,
        (false, Some(_)) => return Err(PromptError::UnexpectedWord(template.id.clone())),
        (false, None) => None,
    };
    Ok(Hypothesis {
        text: template.render(label, word),
        domain: label.clone(),
        template_id: template.id.clone(),
    })
}

/// One hypothesis per label, in label order.
pub fn generate_hypotheses(
    template: &PromptTemplate,
    labels: &[DomainLabel],
    word: Option<&str>,
) -> Result<Vec<Hypothesis>, PromptError> {
    if labels.is_empty() {
        return Err(PromptError::NoLabels);
    }
    labels
        .iter()
        .map(|l| render_hypothesis(template, l, word))
        .collect()
}
