//! Provenance written next to every set of predictions.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain_labelling::HintsMode;
use crate::inventory::DomainInventory;
use crate::prompts::PromptTemplate;
use crate::scoring::{ScoreMode, Scorer};
use crate::wsd::{MonteCarloEstimate, WordBinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Wsd,
    DomainLabelling,
}

/// How the premise and hypothesis reach the model.
pub const PAIR_FORMAT: &str = "premise and hypothesis are sent as the two segments of one sentence pair";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub analytic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub task: Task,
    pub template_id: String,
    pub hypothesis_pattern: String,
    pub pair_format: String,
    pub inventory: String,
    pub inventory_hash: String,
    pub label_count: usize,
    pub scorer_id: String,
    /// Model reported by a remote scorer, if any.
    pub scorer_model: Option<String>,
    pub score_mode: ScoreMode,
    pub tie_break: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_label_policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_binding: Option<WordBinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hints_mode: Option<HintsMode>,
    pub n_instances: usize,
    pub monosemous_shortcuts: usize,
    pub scored_pairs: usize,
    /// Pairs sent to the backend during this run (cache misses).
    pub scorer_dispatches: usize,
    #[serde(default)]
    pub input_hashes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_baseline: Option<BaselineSummary>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunMetadata {
    pub fn new(
        task: Task,
        template: &PromptTemplate,
        inventory: &DomainInventory,
        scorer: &Scorer,
    ) -> Self {
        let now = Utc::now();
        RunMetadata {
            task,
            template_id: template.id().into(),
            hypothesis_pattern: template.pattern().into(),
            pair_format: PAIR_FORMAT.into(),
            inventory: inventory.name().into(),
            inventory_hash: inventory.content_hash(),
            label_count: inventory.labels().len(),
            scorer_id: scorer.id().into(),
            scorer_model: scorer.observed_model(),
            score_mode: ScoreMode::Entailment,
            tie_break: String::new(),
            gold_policy: None,
            multi_label_policy: None,
            word_binding: None,
            hints_mode: None,
            n_instances: 0,
            monosemous_shortcuts: 0,
            scored_pairs: 0,
            scorer_dispatches: 0,
            input_hashes: BTreeMap::new(),
            seed: None,
            random_baseline: None,
            started_at: now,
            finished_at: now,
        }
    }
}
