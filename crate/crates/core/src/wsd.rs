//! Zero-shot WSD over candidate domains.
//!
//! For each instance the senses of the target lemma are mapped to their
//! domains, every distinct domain is verbalised into a hypothesis, the
//! scorer rates each hypothesis against the context, and the best-scoring
//! domain is the prediction. Words whose senses all share one domain are
//! answered without calling the scorer.

use std::collections::BTreeMap;

use chrono::Utc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{DomainInventory, DomainLabel, InventoryError};
use crate::lexicon::WsdInstance;
use crate::metadata::{RunMetadata, Task};
use crate::prompts::{self, PremiseSource, PromptError, PromptTemplate};
use crate::scoring::{ScoreError, ScoreMode, ScoreRequest, Scorer};

pub const TIE_BREAK: &str = "first candidate domain in lexicon sense order";
pub const GOLD_POLICY: &str = "gold domains are the union of the domains of all gold senses";
pub const MULTI_LABEL_POLICY: &str = "a sense contributes every label assigned to it";

#[derive(Debug, Error)]
pub enum WsdError {
    #[error("instance {id}: {source}")]
    Candidates {
        id: String,
        #[source]
        source: InventoryError,
    },
    #[error("instance {id}: {source}")]
    Prompt {
        id: String,
        #[source]
        source: PromptError,
    },
    #[error("scoring failed (instances: {}): {source}", .instances.join(", "))]
    Scoring {
        instances: Vec<String>,
        #[source]
        source: ScoreError,
    },
    #[error("{} instance(s) failed: {}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Failed(Vec<WsdError>),
    #[error("template {0:?} takes its premise from glosses, not contexts")]
    WrongPremiseSource(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("number of trials must be positive")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shortcut {
    None,
    Monosemous,
}

/// What `{word}` binds to in a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WordBinding {
    #[default]
    Lemma,
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsdPrediction {
    #[serde(rename = "id")]
    pub instance_id: String,
    pub predicted_domain: DomainLabel,
    #[serde(rename = "scores")]
    pub domain_scores: BTreeMap<DomainLabel, f64>,
    pub candidate_count: usize,
    pub shortcut: Shortcut,
}

#[derive(Debug, Clone)]
pub struct WsdRun {
    /// Sorted by instance id.
    pub predictions: Vec<WsdPrediction>,
    pub metadata: RunMetadata,
}

/// Index of the first maximal score. Ties go to the earlier position.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

enum Plan {
    Shortcut(DomainLabel),
    Score {
        domains: Vec<DomainLabel>,
        requests: Vec<ScoreRequest>,
    },
}

pub struct Disambiguator<'a> {
    inventory: &'a DomainInventory,
    template: &'a PromptTemplate,
    scorer: &'a Scorer,
    mode: ScoreMode,
    word_binding: WordBinding,
    force_scoring: bool,
}

impl<'a> Disambiguator<'a> {
    pub fn new(
        inventory: &'a DomainInventory,
        template: &'a PromptTemplate,
        scorer: &'a Scorer,
    ) -> Self {
        Disambiguator {
            inventory,
            template,
            scorer,
            mode: ScoreMode::Entailment,
            word_binding: WordBinding::Lemma,
            force_scoring: false,
        }
    }

    pub fn with_mode(mut self, mode: ScoreMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_word_binding(mut self, binding: WordBinding) -> Self {
        self.word_binding = binding;
        self
    }

    /// Score single-domain words too instead of shortcutting them.
    pub fn force_scoring(mut self, force: bool) -> Self {
        self.force_scoring = force;
        self
    }

    fn check_template(&self) -> Result<(), WsdError> {
        if self.template.premise_source() != PremiseSource::Context {
            return Err(WsdError::WrongPremiseSource(self.template.id().into()));
        }
        Ok(())
    }

    fn plan(&self, instance: &WsdInstance) -> Result<Plan, WsdError> {
        let id = || instance.instance_id.clone();
        let cands = self
            .inventory
            .candidate_domains(&instance.lemma, &instance.candidate_senses)
            .map_err(|source| WsdError::Candidates { id: id(), source })?;
        if cands.domains.len() > instance.candidate_senses.len() {
            log::warn!(
                "instance {}: {} candidate domains for {} senses (multi-label assignments)",
                instance.instance_id,
                cands.domains.len(),
                instance.candidate_senses.len()
            );
        }
        if cands.domains.len() == 1 && !self.force_scoring {
            return Ok(Plan::Shortcut(cands.domains[0].clone()));
        }
        let word = self.template.requires_word().then(|| match self.word_binding {
            WordBinding::Lemma => prompts::verbalize_lemma(&instance.lemma),
            WordBinding::Surface => instance.surface(),
        });
        let hypotheses = prompts::generate_hypotheses(self.template, &cands.domains, word.as_deref())
            .map_err(|source| WsdError::Prompt { id: id(), source })?;
        let mut requests = Vec::with_capacity(hypotheses.len());
        for h in &hypotheses {
            let (premise, _) = prompts::render_pair(self.template, &instance.context, &h.domain, word.as_deref())
                .map_err(|source| WsdError::Prompt { id: id(), source })?;
            requests.push(ScoreRequest::new(premise, h.text.clone(), self.mode));
        }
        Ok(Plan::Score {
            domains: cands.domains,
            requests,
        })
    }

    fn decide(instance: &WsdInstance, domains: Vec<DomainLabel>, scores: &[f64]) -> WsdPrediction {
        let best = argmax_first(scores).expect("at least one candidate");
        WsdPrediction {
            instance_id: instance.instance_id.clone(),
            predicted_domain: domains[best].clone(),
            candidate_count: domains.len(),
            domain_scores: domains.into_iter().zip(scores.iter().copied()).collect(),
            shortcut: Shortcut::None,
        }
    }

    fn shortcut(instance: &WsdInstance, domain: DomainLabel) -> WsdPrediction {
        WsdPrediction {
            instance_id: instance.instance_id.clone(),
            predicted_domain: domain,
            domain_scores: BTreeMap::new(),
            candidate_count: 1,
            shortcut: Shortcut::Monosemous,
        }
    }

    pub fn disambiguate(&self, instance: &WsdInstance) -> Result<WsdPrediction, WsdError> {
        self.check_template()?;
        match self.plan(instance)? {
            Plan::Shortcut(domain) => Ok(Self::shortcut(instance, domain)),
            Plan::Score { domains, requests } => {
                let scores = self.scorer.score_batch(&requests).map_err(|source| WsdError::Scoring {
                    instances: vec![instance.instance_id.clone()],
                    source,
                })?;
                Ok(Self::decide(instance, domains, &scores))
            }
        }
    }

    /// Disambiguate a whole dataset. All pairs go to the scorer in one call,
    /// so batching and concurrency are the scorer's concern. Output is sorted
    /// by instance id.
    pub fn run(&self, dataset: &[WsdInstance]) -> Result<WsdRun, WsdError> {
        self.check_template()?;
        if dataset.is_empty() {
            return Err(WsdError::EmptyDataset);
        }
        let started_at = Utc::now();
        let dispatched_before = self.scorer.dispatched_requests();

        let mut plans = Vec::with_capacity(dataset.len());
        let mut errors = Vec::new();
        for inst in dataset {
            match self.plan(inst) {
                Ok(p) => plans.push((inst, p)),
                Err(e) => errors.push(e),
            }
        }
        if !errors.is_empty() {
            return Err(WsdError::Failed(errors));
        }

        let mut requests = Vec::new();
        let mut owner = Vec::new();
        for (inst, plan) in &plans {
            if let Plan::Score { requests: r, .. } = plan {
                owner.extend(std::iter::repeat_n(inst.instance_id.as_str(), r.len()));
                requests.extend(r.iter().cloned());
            }
        }
        let scores = self
            .scorer
            .score_batch(&requests)
            .map_err(|source| WsdError::Scoring {
                instances: failing_instances(&source, &owner),
                source,
            })?;

        let mut offset = 0;
        let mut shortcuts = 0;
        let mut predictions = Vec::with_capacity(plans.len());
        for (inst, plan) in plans {
            predictions.push(match plan {
                Plan::Shortcut(domain) => {
                    shortcuts += 1;
                    Self::shortcut(inst, domain)
                }
                Plan::Score { domains, .. } => {
                    let n = domains.len();
                    let p = Self::decide(inst, domains, &scores[offset..offset + n]);
                    offset += n;
                    p
                }
            });
        }
        predictions.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));

        let mut metadata = RunMetadata::new(Task::Wsd, self.template, self.inventory, self.scorer);
        metadata.score_mode = self.mode;
        metadata.tie_break = TIE_BREAK.into();
        metadata.gold_policy = Some(GOLD_POLICY.into());
        metadata.multi_label_policy = Some(MULTI_LABEL_POLICY.into());
        metadata.word_binding = self.template.requires_word().then_some(self.word_binding);
        metadata.n_instances = predictions.len();
        metadata.monosemous_shortcuts = shortcuts;
        metadata.scored_pairs = requests.len();
        metadata.scorer_dispatches = self.scorer.dispatched_requests() - dispatched_before;
        metadata.started_at = started_at;
        metadata.finished_at = Utc::now();
        Ok(WsdRun {
            predictions,
            metadata,
        })
    }
}

/// Instance ids touched by a failed scoring call, deduplicated and sorted.
pub(crate) fn failing_instances(err: &ScoreError, owner: &[&str]) -> Vec<String> {
    let indices: &[usize] = match err {
        ScoreError::Unavailable { indices, .. } | ScoreError::Rejected { indices, .. } => indices,
        ScoreError::EmptyText { index } => std::slice::from_ref(index),
        _ => &[],
    };
    let mut ids: Vec<String> = indices
        .iter()
        .filter_map(|&i| owner.get(i).map(|s| s.to_string()))
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

struct BaselineItem {
    hits: Vec<bool>,
}

fn baseline_items(
    dataset: &[WsdInstance],
    inventory: &DomainInventory,
) -> Result<Vec<BaselineItem>, WsdError> {
    if dataset.is_empty() {
        return Err(WsdError::EmptyDataset);
    }
    let mut sorted: Vec<&WsdInstance> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    sorted
        .into_iter()
        .map(|inst| {
            let cands = inventory
                .candidate_domains(&inst.lemma, &inst.candidate_senses)
                .map_err(|source| WsdError::Candidates {
                    id: inst.instance_id.clone(),
                    source,
                })?;
            let gold = inventory.gold_domains(&inst.gold_senses);
            Ok(BaselineItem {
                hits: cands.domains.iter().map(|d| gold.contains(d)).collect(),
            })
        })
        .collect()
}

/// Expected accuracy of picking a candidate domain uniformly at random.
pub fn random_baseline_analytic(
    dataset: &[WsdInstance],
    inventory: &DomainInventory,
) -> Result<f64, WsdError> {
    let items = baseline_items(dataset, inventory)?;
    let total: f64 = items
        .iter()
        .map(|it| it.hits.iter().filter(|&&h| h).count() as f64 / it.hits.len() as f64)
        .sum();
    Ok(total / items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub accuracy: f64,
    /// Standard error of the mean over trials; 0 for a single trial.
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Seeded simulation of the uniform random baseline. Each trial draws one
/// candidate per instance (instances in id order) and records accuracy.
pub fn random_baseline_mc(
    dataset: &[WsdInstance],
    inventory: &DomainInventory,
    seed: u64,
    trials: usize,
) -> Result<MonteCarloEstimate, WsdError> {
    if trials == 0 {
        return Err(WsdError::NoTrials);
    }
    let items = baseline_items(dataset, inventory)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = items.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let correct = items
            .iter()
            .filter(|it| it.hits[rng.random_range(0..it.hits.len())])
            .count();
        let acc = correct as f64 / n;
        sum += acc;
        sum_sq += acc * acc;
    }
    let t = trials as f64;
    let mean = sum / t;
    let std_error = if trials > 1 {
        let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        accuracy: mean,
        std_error,
        trials,
        seed,
    })
}
