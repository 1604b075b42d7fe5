//! Gloss domain labelling over the full label space of an inventory.

use std::collections::BTreeMap;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{DomainInventory, DomainLabel};
use crate::lexicon::{strip_hints, GlossLabelInstance, SynsetId};
use crate::metadata::{RunMetadata, Task};
use crate::prompts::{self, PremiseSource, PromptError, PromptTemplate};
use crate::scoring::{ScoreError, ScoreMode, ScoreRequest, Scorer};
use crate::wsd::{argmax_first, failing_instances};

pub const TIE_BREAK: &str = "alphabetically first label";
pub const GOLD_POLICY: &str = "correct when the prediction matches any gold label";

#[derive(Debug, Error)]
pub enum DlError {
    #[error("inventory {0:?} has no labels")]
    NoLabels(String),
    #[error("template {0:?} must take its premise from glosses and must not use {{word}}")]
    UnsuitableTemplate(String),
    #[error("synset {synset}: no gold labels for inventory {inventory:?}")]
    MissingGold { synset: SynsetId, inventory: String },
    #[error("synset {synset}: gold label {label:?} is not in inventory {inventory:?}")]
    UnknownGold {
        synset: SynsetId,
        label: String,
        inventory: String,
    },
    #[error("synset {synset}: {source}")]
    Prompt {
        synset: SynsetId,
        #[source]
        source: PromptError,
    },
    #[error("scoring failed (synsets: {}): {source}", .synsets.join(", "))]
    Scoring {
        synsets: Vec<String>,
        #[source]
        source: ScoreError,
    },
    #[error("{} instance(s) failed: {}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Failed(Vec<DlError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HintsMode {
    #[default]
    WithHints,
    WithoutHints,
}

impl HintsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HintsMode::WithHints => "with_hints",
            HintsMode::WithoutHints => "without_hints",
        }
    }

    pub fn premise(self, gloss: &str) -> String {
        match self {
            HintsMode::WithHints => gloss.to_string(),
            HintsMode::WithoutHints => strip_hints(gloss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlPrediction {
    #[serde(rename = "id")]
    pub synset: SynsetId,
    pub inventory: String,
    #[serde(rename = "predicted_domain")]
    pub predicted_label: DomainLabel,
    #[serde(rename = "scores")]
    pub label_scores: BTreeMap<DomainLabel, f64>,
    pub hints_mode: HintsMode,
}

#[derive(Debug, Clone)]
pub struct DlRun {
    /// Sorted by synset id.
    pub predictions: Vec<DlPrediction>,
    pub metadata: RunMetadata,
}

pub struct GlossLabeller<'a> {
    inventory: &'a DomainInventory,
    template: &'a PromptTemplate,
    scorer: &'a Scorer,
    hints_mode: HintsMode,
    mode: ScoreMode,
}

impl<'a> GlossLabeller<'a> {
    pub fn new(
        inventory: &'a DomainInventory,
        template: &'a PromptTemplate,
        scorer: &'a Scorer,
        hints_mode: HintsMode,
    ) -> Self {
        GlossLabeller {
            inventory,
            template,
            scorer,
            hints_mode,
            mode: ScoreMode::Entailment,
        }
    }

    pub fn with_mode(mut self, mode: ScoreMode) -> Self {
        self.mode = mode;
        self
    }

    fn check(&self) -> Result<Vec<DomainLabel>, DlError> {
        if self.template.premise_source() != PremiseSource::Gloss || self.template.requires_word() {
            return Err(DlError::UnsuitableTemplate(self.template.id().into()));
        }
        // BTreeSet iteration is alphabetical, which makes first-max the tie-break.
        let labels: Vec<DomainLabel> = self.inventory.labels().iter().cloned().collect();
        if labels.is_empty() {
            return Err(DlError::NoLabels(self.inventory.name().into()));
        }
        Ok(labels)
    }

    fn requests(&self, instance: &GlossLabelInstance, labels: &[DomainLabel]) -> Result<Vec<ScoreRequest>, DlError> {
        let premise = self.hints_mode.premise(&instance.gloss);
        let prompt_err = |source| DlError::Prompt {
            synset: instance.synset,
            source,
        };
        let hypotheses = prompts::generate_hypotheses(self.template, labels, None).map_err(prompt_err)?;
        hypotheses
            .into_iter()
            .map(|h| {
                let (p, h) = prompts::render_pair(self.template, &premise, &h.domain, None).map_err(prompt_err)?;
                Ok(ScoreRequest::new(p, h.text, self.mode))
            })
            .collect()
    }

    fn decide(&self, instance: &GlossLabelInstance, labels: &[DomainLabel], scores: &[f64]) -> DlPrediction {
        let best = argmax_first(scores).expect("inventory has labels");
        DlPrediction {
            synset: instance.synset,
            inventory: self.inventory.name().into(),
            predicted_label: labels[best].clone(),
            label_scores: labels.iter().cloned().zip(scores.iter().copied()).collect(),
            hints_mode: self.hints_mode,
        }
    }

    pub fn label_gloss(&self, instance: &GlossLabelInstance) -> Result<DlPrediction, DlError> {
        let labels = self.check()?;
        let requests = self.requests(instance, &labels)?;
        let scores = self.scorer.score_batch(&requests).map_err(|source| DlError::Scoring {
            synsets: vec![instance.synset.to_string()],
            source,
        })?;
        Ok(self.decide(instance, &labels, &scores))
    }

    /// Gold labels of `instance` for this inventory, validated.
    fn gold<'i>(&self, instance: &'i GlossLabelInstance) -> Result<&'i [String], DlError> {
        let name = self.inventory.name();
        let gold = instance
            .gold
            .get(name)
            .filter(|g| !g.is_empty())
            .ok_or_else(|| DlError::MissingGold {
                synset: instance.synset,
                inventory: name.into(),
            })?;
        if let Some(bad) = gold.iter().find(|g| !self.inventory.contains(g)) {
            return Err(DlError::UnknownGold {
                synset: instance.synset,
                label: bad.clone(),
                inventory: name.into(),
            });
        }
        Ok(gold)
    }

    pub fn run(&self, dataset: &[GlossLabelInstance]) -> Result<DlRun, DlError> {
        let labels = self.check()?;
        let started_at = Utc::now();
        let dispatched_before = self.scorer.dispatched_requests();

        let mut errors = Vec::new();
        let mut requests = Vec::with_capacity(dataset.len() * labels.len());
        let mut owner = Vec::with_capacity(requests.capacity());
        let names: Vec<String> = dataset.iter().map(|i| i.synset.to_string()).collect();
        for (inst, name) in dataset.iter().zip(&names) {
            let checked = self.gold(inst).and_then(|_| self.requests(inst, &labels));
            match checked {
                Ok(r) => {
                    owner.extend(std::iter::repeat_n(name.as_str(), r.len()));
                    requests.extend(r);
                }
                Err(e) => errors.push(e),
            }
        }
        if !errors.is_empty() {
            return Err(DlError::Failed(errors));
        }
        let scores = self.scorer.score_batch(&requests).map_err(|source| DlError::Scoring {
            synsets: failing_instances(&source, &owner),
            source,
        })?;
        let mut predictions: Vec<DlPrediction> = dataset
            .iter()
            .zip(scores.chunks(labels.len()))
            .map(|(inst, s)| self.decide(inst, &labels, s))
            .collect();
        predictions.sort_by(|a, b| a.synset.to_string().cmp(&b.synset.to_string()));

        let mut metadata = RunMetadata::new(Task::DomainLabelling, self.template, self.inventory, self.scorer);
        metadata.score_mode = self.mode;
        metadata.tie_break = TIE_BREAK.into();
        metadata.gold_policy = Some(GOLD_POLICY.into());
        metadata.hints_mode = Some(self.hints_mode);
        metadata.n_instances = predictions.len();
        metadata.scored_pairs = requests.len();
        metadata.scorer_dispatches = self.scorer.dispatched_requests() - dispatched_before;
        metadata.started_at = started_at;
        metadata.finished_at = Utc::now();
        Ok(DlRun {
            predictions,
            metadata,
        })
    }
}
