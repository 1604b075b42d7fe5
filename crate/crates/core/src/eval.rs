//! Micro-F1, per-POS and per-label scores, and rank correlation between tasks.
//!
//! Per-label bookkeeping: every instance is filed under exactly one gold
//! label, the one its prediction matched if it was correct, otherwise its
//! first gold label. A correct instance is a true positive for that label.
//! An incorrect one is a false negative for it and a false positive for the
//! predicted label. Supports therefore sum to the number of instances and,
//! with one prediction per instance, micro-F1 equals accuracy.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain_labelling::DlPrediction;
use crate::inventory::{DomainInventory, DomainLabel};
use crate::lexicon::{GlossLabelInstance, Pos, WsdInstance};
use crate::metadata::Task;
use crate::wsd::WsdPrediction;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for instance {0}")]
    MissingPrediction(String),
    #[error("prediction for unknown instance {0}")]
    UnknownPrediction(String),
    #[error("more than one prediction for instance {0}")]
    DuplicatePrediction(String),
    #[error("instance {0} has no gold domain under this inventory")]
    NoGold(String),
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rank correlation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("rank correlation is undefined: a vector is constant (degenerate)")]
    Degenerate,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("reports are over different inventories ({0:?} vs {1:?})")]
    InventoryMismatch(String, String),
    #[error("fewer than 2 shared labels ({0} found)")]
    TooFewSharedLabels(usize),
    #[error("micro-F1 {micro_f1} differs from accuracy {accuracy}")]
    CoverageMismatch { micro_f1: f64, accuracy: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosScores {
    pub f1: f64,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub inventory: String,
    pub n_instances: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub micro_f1: f64,
    /// Keyed by POS name; only parts of speech with instances appear.
    #[serde(default)]
    pub per_pos: BTreeMap<String, PosScores>,
    pub per_label: BTreeMap<DomainLabel, LabelScores>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// 2tp / (2tp + fp + fn), the harmonic mean of precision and recall
/// computed from counts so identities like micro-F1 = accuracy hold exactly.
fn f1(c: Counts) -> f64 {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

struct Outcome<'a> {
    pos: Option<Pos>,
    predicted: &'a DomainLabel,
    gold: Vec<DomainLabel>,
}

fn aggregate(task: Task, inventory: &str, outcomes: &[Outcome]) -> Result<EvalReport, EvalError> {
    let mut labels: BTreeMap<DomainLabel, Counts> = BTreeMap::new();
    let mut pos: BTreeMap<Pos, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for o in outcomes {
        let hit = o.gold.contains(o.predicted);
        let filed = if hit { o.predicted } else { &o.gold[0] };
        if hit {
            correct += 1;
            labels.entry(filed.clone()).or_default().tp += 1;
        } else {
            labels.entry(filed.clone()).or_default().fn_ += 1;
            labels.entry(o.predicted.clone()).or_default().fp += 1;
        }
        if let Some(p) = o.pos {
            let e = pos.entry(p).or_default();
            e.0 += hit as usize;
            e.1 += 1;
        }
    }
    let n = outcomes.len();
    let accuracy = ratio(correct, n);
    let micro = labels.values().fold(Counts::default(), |a, c| Counts {
        tp: a.tp + c.tp,
        fp: a.fp + c.fp,
        fn_: a.fn_ + c.fn_,
    });
    let micro_f1 = f1(micro);
    if micro_f1 != accuracy {
        return Err(EvalError::CoverageMismatch { micro_f1, accuracy });
    }
    let per_label = labels
        .into_iter()
        .map(|(l, c)| {
            let s = LabelScores {
                precision: ratio(c.tp, c.tp + c.fp),
                recall: ratio(c.tp, c.tp + c.fn_),
                f1: f1(c),
                support: c.tp + c.fn_,
                true_positives: c.tp,
                false_positives: c.fp,
                false_negatives: c.fn_,
            };
            (l, s)
        })
        .collect();
    let per_pos = pos
        .into_iter()
        .map(|(p, (c, t))| {
            (
                p.name().to_string(),
                PosScores {
                    f1: ratio(c, t),
                    correct: c,
                    total: t,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        task,
        inventory: inventory.into(),
        n_instances: n,
        correct,
        accuracy,
        micro_f1,
        per_pos,
        per_label,
    })
}

fn index_predictions<'p, P>(
    predictions: &'p [P],
    id: impl Fn(&P) -> String,
) -> Result<HashMap<String, &'p P>, EvalError> {
    let mut by_id = HashMap::with_capacity(predictions.len());
    for p in predictions {
        let key = id(p);
        if by_id.contains_key(&key) {
            return Err(EvalError::DuplicatePrediction(key));
        }
        by_id.insert(key, p);
    }
    Ok(by_id)
}

fn check_no_extra<P>(by_id: &HashMap<String, &P>, known: impl Fn(&str) -> bool) -> Result<(), EvalError> {
    let mut extra: Vec<&String> = by_id.keys().filter(|k| !known(k)).collect();
    extra.sort();
    match extra.first() {
        Some(id) => Err(EvalError::UnknownPrediction((*id).clone())),
        None => Ok(()),
    }
}

/// Correct when the predicted domain is among the gold senses' domains.
pub fn score_wsd(
    predictions: &[WsdPrediction],
    dataset: &[WsdInstance],
    inventory: &DomainInventory,
) -> Result<EvalReport, EvalError> {
    let by_id = index_predictions(predictions, |p| p.instance_id.clone())?;
    let mut outcomes = Vec::with_capacity(dataset.len());
    for inst in dataset {
        let p = by_id
            .get(&inst.instance_id)
            .ok_or_else(|| EvalError::MissingPrediction(inst.instance_id.clone()))?;
        let gold = inventory.gold_domains(&inst.gold_senses);
        if gold.is_empty() {
            return Err(EvalError::NoGold(inst.instance_id.clone()));
        }
        outcomes.push(Outcome {
            pos: Some(inst.pos),
            predicted: &p.predicted_domain,
            gold,
        });
    }
    let ids: std::collections::HashSet<&str> = dataset.iter().map(|i| i.instance_id.as_str()).collect();
    check_no_extra(&by_id, |k| ids.contains(k))?;
    aggregate(Task::Wsd, inventory.name(), &outcomes)
}

/// Correct when the predicted label matches any gold label for the inventory.
pub fn score_domain_labelling(
    predictions: &[DlPrediction],
    dataset: &[GlossLabelInstance],
    inventory: &DomainInventory,
) -> Result<EvalReport, EvalError> {
    let by_id = index_predictions(predictions, |p| p.synset.to_string())?;
    let mut outcomes = Vec::with_capacity(dataset.len());
    for inst in dataset {
        let key = inst.synset.to_string();
        let p = by_id
            .get(&key)
            .ok_or_else(|| EvalError::MissingPrediction(key.clone()))?;
        let gold: Vec<DomainLabel> = inst
            .gold
            .get(inventory.name())
            .map(|g| g.iter().filter_map(|s| DomainLabel::new(s)).collect())
            .unwrap_or_default();
        if gold.is_empty() {
            return Err(EvalError::NoGold(key));
        }
        outcomes.push(Outcome {
            pos: None,
            predicted: &p.predicted_label,
            gold,
        });
    }
    let ids: std::collections::HashSet<String> = dataset.iter().map(|i| i.synset.to_string()).collect();
    check_no_extra(&by_id, |k| ids.contains(k))?;
    aggregate(Task::DomainLabelling, inventory.name(), &outcomes)
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    if let Some(i) = xs.iter().zip(ys).position(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Degenerate);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPair {
    pub label: DomainLabel,
    pub f1_a: f64,
    pub f1_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub inventory: String,
    pub task_a: Task,
    pub task_b: Task,
    pub shared_labels: Vec<DomainLabel>,
    pub rho: f64,
    pub pairs: Vec<LabelPair>,
}

/// Rank correlation of per-label F1 over labels supported in both reports.
pub fn correlate_tasks(a: &EvalReport, b: &EvalReport) -> Result<CorrelationReport, EvalError> {
    if a.inventory != b.inventory {
        return Err(EvalError::InventoryMismatch(a.inventory.clone(), b.inventory.clone()));
    }
    let pairs: Vec<LabelPair> = a
        .per_label
        .iter()
        .filter(|(_, s)| s.support > 0)
        .filter_map(|(l, sa)| {
            b.per_label
                .get(l)
                .filter(|sb| sb.support > 0)
                .map(|sb| LabelPair {
                    label: l.clone(),
                    f1_a: sa.f1,
                    f1_b: sb.f1,
                })
        })
        .collect();
    if pairs.len() < 2 {
        return Err(EvalError::TooFewSharedLabels(pairs.len()));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.f1_a).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.f1_b).collect();
    let rho = spearman_rho(&xs, &ys)?;
    Ok(CorrelationReport {
        inventory: a.inventory.clone(),
        task_a: a.task,
        task_b: b.task,
        shared_labels: pairs.iter().map(|p| p.label.clone()).collect(),
        rho,
        pairs,
    })
}

impl CorrelationReport {
    /// Scatter data, one row per shared label. The first report's F1 goes in
    /// `f1_dl` and the second's in `f1_wsd`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "f1_dl", "f1_wsd"])?;
        for p in &self.pairs {
            w.write_record([p.label.as_str(), &p.f1_a.to_string(), &p.f1_b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let width = self.pairs.iter().map(|p| p.label.as_str().chars().count()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "inventory: {}", self.inventory);
        let _ = writeln!(s, "shared labels: {}", self.shared_labels.len());
        let _ = writeln!(s, "spearman rho: {:.4}", self.rho);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<width$}  {:>7}  {:>7}", "label", "f1_a", "f1_b");
        for p in &self.pairs {
            let _ = writeln!(s, "{:<width$}  {:>7.4}  {:>7.4}", p.label.as_str(), p.f1_a, p.f1_b);
        }
        s
    }
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let task = match self.task {
            Task::Wsd => "wsd",
            Task::DomainLabelling => "domain_labelling",
        };
        let _ = writeln!(s, "task: {task}");
        let _ = writeln!(s, "inventory: {}", self.inventory);
        let _ = writeln!(s, "instances: {}", self.n_instances);
        let _ = writeln!(s, "correct: {}", self.correct);
        let _ = writeln!(s, "micro-F1: {:.4}", self.micro_f1);
        if !self.per_pos.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<6}  {:>7}  {:>7}  {:>7}", "pos", "f1", "correct", "total");
            for pos in Pos::ALL {
                if let Some(p) = self.per_pos.get(pos.name()) {
                    let _ = writeln!(s, "{:<6}  {:>7.4}  {:>7}  {:>7}", pos.name(), p.f1, p.correct, p.total);
                }
            }
        }
        let width = self
            .per_label
            .keys()
            .map(|l| l.as_str().chars().count())
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>7}  {:>7}  {:>7}",
            "label", "precision", "recall", "f1", "support"
        );
        for (l, x) in &self.per_label {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>7.4}  {:>7.4}  {:>7}",
                l.as_str(),
                x.precision,
                x.recall,
                x.f1,
                x.support
            );
        }
        s
    }
}
