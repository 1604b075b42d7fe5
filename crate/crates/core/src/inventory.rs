//! Domain inventories: label sets, synset-to-domain assignments and optional
//! label hierarchies.
//!
//! Assignment files are TSV, `<synset_id>\t<label1>[;<label2>...]`, so labels
//! may contain commas. Hierarchy files are TSV `<child>\t<parent>`, with roots
//! written as `<label>\t-`. Roots have depth 1.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::lexicon::SynsetId;

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {reason}")]
    Malformed {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("synset {synset} is assigned label {label:?}, which the hierarchy does not declare")]
    UndeclaredLabel { synset: SynsetId, label: String },
    #[error("hierarchy contains a cycle through {0:?}")]
    Cycle(String),
    #[error("label {label:?} has two parents: {first:?} and {second:?}")]
    ConflictingParent {
        label: String,
        first: String,
        second: String,
    },
    #[error("synset {0} appears twice in the assignment file")]
    DuplicateSynset(SynsetId),
    #[error("inventory {0:?} has no hierarchy to truncate")]
    NoHierarchy(String),
    #[error("maximum depth must be at least 1")]
    InvalidDepth,
    #[error("no candidate domains for {lemma:?}: none of its senses has a domain and no fallback is set")]
    NoCandidates { lemma: String },
    #[error("no candidate senses for {lemma:?}")]
    NoSenses { lemma: String },
    #[error("invalid domain label {0:?}")]
    BadLabel(String),
}

/// A domain label, compared after NFC normalisation and trimming.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DomainLabel(String);

impl DomainLabel {
    pub fn new(raw: &str) -> Option<Self> {
        let normalized: String = raw.nfc().collect();
        let trimmed = normalized.trim();
        (!trimmed.is_empty()).then(|| DomainLabel(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for DomainLabel {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for DomainLabel {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl Serialize for DomainLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for DomainLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        DomainLabel::new(&s).ok_or_else(|| serde::de::Error::custom("empty domain label"))
    }
}

/// Candidate domains D^w of a word: the deduplicated domains of its senses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDomains {
    pub word: String,
    /// First-appearance order over senses in lexicon order.
    pub domains: Vec<DomainLabel>,
    pub provenance: BTreeMap<DomainLabel, Vec<SynsetId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventoryStats {
    pub name: String,
    pub labels: usize,
    pub assignments: usize,
    pub multi_label_synsets: usize,
    /// Depth to number of labels at that depth; empty without a hierarchy.
    pub depth_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainInventory {
    name: String,
    labels: BTreeSet<DomainLabel>,
    assignments: BTreeMap<SynsetId, Vec<DomainLabel>>,
    /// Child to parent; `None` marks a root.
    hierarchy: Option<BTreeMap<DomainLabel, Option<DomainLabel>>>,
    fallback: Option<DomainLabel>,
}

fn read(path: &Path) -> Result<String, InventoryError> {
    fs::read_to_string(path).map_err(|source| InventoryError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl DomainInventory {
    pub fn load(
        path: impl AsRef<Path>,
        name: &str,
        hierarchy_path: Option<&Path>,
    ) -> Result<Self, InventoryError> {
        let assignments = read(path.as_ref())?;
        let hierarchy = hierarchy_path.map(read).transpose()?;
        Self::parse(name, &assignments, hierarchy.as_deref())
    }

    pub fn parse(
        name: &str,
        assignments_tsv: &str,
        hierarchy_tsv: Option<&str>,
    ) -> Result<Self, InventoryError> {
        let assignments = parse_assignments(assignments_tsv)?;
        let hierarchy = hierarchy_tsv.map(parse_hierarchy).transpose()?;
        Self::from_parts(name, assignments, hierarchy)
    }

    pub fn from_parts(
        name: &str,
        assignments: BTreeMap<SynsetId, Vec<DomainLabel>>,
        hierarchy: Option<BTreeMap<DomainLabel, Option<DomainLabel>>>,
    ) -> Result<Self, InventoryError> {
        let mut labels: BTreeSet<DomainLabel> = assignments.values().flatten().cloned().collect();
        if let Some(h) = &hierarchy {
            check_acyclic(h)?;
            for (synset, assigned) in &assignments {
                if let Some(label) = assigned.iter().find(|l| !h.contains_key(*l)) {
                    return Err(InventoryError::UndeclaredLabel {
                        synset: *synset,
                        label: label.to_string(),
                    });
                }
            }
            labels.extend(h.keys().cloned());
        }
        Ok(DomainInventory {
            name: name.to_string(),
            labels,
            assignments,
            hierarchy,
            fallback: None,
        })
    }

    /// Set the label returned for synsets without an assignment. The label
    /// joins the label set if it is not already there.
    pub fn with_fallback(mut self, label: &str) -> Result<Self, InventoryError> {
        let label = DomainLabel::new(label).ok_or_else(|| InventoryError::BadLabel(label.into()))?;
        if let Some(h) = &mut self.hierarchy {
            h.entry(label.clone()).or_insert(None);
        }
        self.labels.insert(label.clone());
        self.fallback = Some(label);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// All labels in alphabetical order.
    pub fn labels(&self) -> &BTreeSet<DomainLabel> {
        &self.labels
    }

    pub fn assignments(&self) -> &BTreeMap<SynsetId, Vec<DomainLabel>> {
        &self.assignments
    }

    pub fn fallback(&self) -> Option<&DomainLabel> {
        self.fallback.as_ref()
    }

    pub fn has_hierarchy(&self) -> bool {
        self.hierarchy.is_some()
    }

    pub fn contains(&self, label: &str) -> bool {
        DomainLabel::new(label).is_some_and(|l| self.labels.contains(&l))
    }

    pub fn parent(&self, label: &DomainLabel) -> Option<&DomainLabel> {
        self.hierarchy.as_ref()?.get(label)?.as_ref()
    }

    /// Depth of a label in the hierarchy (roots are 1).
    pub fn depth(&self, label: &DomainLabel) -> Option<usize> {
        let h = self.hierarchy.as_ref()?;
        if !h.contains_key(label) {
            return None;
        }
        let mut depth = 1;
        let mut cur = label;
        while let Some(Some(parent)) = h.get(cur) {
            depth += 1;
            cur = parent;
        }
        Some(depth)
    }

    /// Labels assigned to a synset, or the fallback when it has none.
    pub fn domains_of_sense(&self, synset: &SynsetId) -> &[DomainLabel] {
        match (self.assignments.get(synset), &self.fallback) {
            (Some(labels), _) => labels,
            (None, Some(fallback)) => std::slice::from_ref(fallback),
            (None, None) => &[],
        }
    }

    /// Union of the domains of `senses`, in first-appearance order.
    pub fn candidate_domains(
        &self,
        word: &str,
        senses: &[SynsetId],
    ) -> Result<CandidateDomains, InventoryError> {
        if senses.is_empty() {
            return Err(InventoryError::NoSenses { lemma: word.into() });
        }
        let mut domains = Vec::new();
        let mut provenance: BTreeMap<DomainLabel, Vec<SynsetId>> = BTreeMap::new();
        for sense in senses {
            for label in self.domains_of_sense(sense) {
                let contributors = provenance.entry(label.clone()).or_default();
                if contributors.is_empty() {
                    domains.push(label.clone());
                }
                if !contributors.contains(sense) {
                    contributors.push(*sense);
                }
            }
        }
        if domains.is_empty() {
            return Err(InventoryError::NoCandidates { lemma: word.into() });
        }
        Ok(CandidateDomains {
            word: word.into(),
            domains,
            provenance,
        })
    }

    /// Union of the domains of every gold sense, in gold order.
    pub fn gold_domains(&self, gold: &[SynsetId]) -> Vec<DomainLabel> {
        let mut out: Vec<DomainLabel> = Vec::new();
        for label in gold.iter().flat_map(|s| self.domains_of_sense(s)) {
            if !out.contains(label) {
                out.push(label.clone());
            }
        }
        out
    }

    /// Drop every label deeper than `max_depth`, remapping assignments to the
    /// nearest ancestor that survives.
    pub fn truncate_hierarchy(&self, max_depth: usize) -> Result<Self, InventoryError> {
        if max_depth == 0 {
            return Err(InventoryError::InvalidDepth);
        }
        let hierarchy = self
            .hierarchy
            .as_ref()
            .ok_or_else(|| InventoryError::NoHierarchy(self.name.clone()))?;

        let remap = |label: &DomainLabel| -> DomainLabel {
            let mut cur = label;
            let mut depth = self.depth(cur).expect("label declared in hierarchy");
            while depth > max_depth {
                cur = hierarchy[cur]
                    .as_ref()
                    .expect("a label below the root has a parent");
                depth -= 1;
            }
            cur.clone()
        };

        let assignments = self
            .assignments
            .iter()
            .map(|(synset, labels)| {
                let mut mapped: Vec<DomainLabel> = Vec::with_capacity(labels.len());
                for label in labels.iter().map(remap) {
                    if !mapped.contains(&label) {
                        mapped.push(label);
                    }
                }
                (*synset, mapped)
            })
            .collect();
        let kept: BTreeMap<_, _> = hierarchy
            .iter()
            .filter(|(label, _)| self.depth(label).is_some_and(|d| d <= max_depth))
            .map(|(l, p)| (l.clone(), p.clone()))
            .collect();
        let labels = self
            .labels
            .iter()
            .filter(|l| kept.contains_key(*l))
            .cloned()
            .collect();

        Ok(DomainInventory {
            name: self.name.clone(),
            labels,
            assignments,
            hierarchy: Some(kept),
            fallback: self.fallback.as_ref().map(remap),
        })
    }

    pub fn stats(&self) -> InventoryStats {
        let mut depth_histogram = BTreeMap::new();
        if self.hierarchy.is_some() {
            for label in &self.labels {
                if let Some(d) = self.depth(label) {
                    *depth_histogram.entry(d).or_insert(0) += 1;
                }
            }
        }
        InventoryStats {
            name: self.name.clone(),
            labels: self.labels.len(),
            assignments: self.assignments.len(),
            multi_label_synsets: self.assignments.values().filter(|l| l.len() > 1).count(),
            depth_histogram,
        }
    }

    pub fn render_assignments(&self) -> String {
        let mut out = String::new();
        for (synset, labels) in &self.assignments {
            let joined: Vec<&str> = labels.iter().map(DomainLabel::as_str).collect();
            out.push_str(&format!("{synset}\t{}\n", joined.join(";")));
        }
        out
    }

    pub fn render_hierarchy(&self) -> Option<String> {
        let h = self.hierarchy.as_ref()?;
        let mut out = String::new();
        for (child, parent) in h {
            let parent = parent.as_ref().map_or("-", DomainLabel::as_str);
            out.push_str(&format!("{child}\t{parent}\n"));
        }
        Some(out)
    }

    /// SHA-256 over the canonical rendering of the inventory.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        hasher.update([0]);
        hasher.update(self.render_assignments().as_bytes());
        hasher.update([0]);
        let labels: Vec<&str> = self.labels.iter().map(DomainLabel::as_str).collect();
        hasher.update(labels.join("\n").as_bytes());
        hasher.update([0]);
        if let Some(h) = self.render_hierarchy() {
            hasher.update(h.as_bytes());
        }
        hasher.update([0]);
        if let Some(f) = &self.fallback {
            hasher.update(f.as_str().as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_assignments(text: &str) -> Result<BTreeMap<SynsetId, Vec<DomainLabel>>, InventoryError> {
    let mut out = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let malformed = |reason: String| InventoryError::Malformed {
            file: "assignment file",
            line,
            reason,
        };
        let (id, labels) = raw
            .split_once('\t')
            .ok_or_else(|| malformed("expected <synset_id>\\t<labels>".into()))?;
        let id: SynsetId = id.trim().parse().map_err(|e| malformed(format!("{e}")))?;
        let mut parsed: Vec<DomainLabel> = Vec::new();
        for piece in labels.split(';') {
            let label = DomainLabel::new(piece).ok_or_else(|| malformed("empty label".into()))?;
            if !parsed.contains(&label) {
                parsed.push(label);
            }
        }
        if out.insert(id, parsed).is_some() {
            return Err(InventoryError::DuplicateSynset(id));
        }
    }
    Ok(out)
}

fn parse_hierarchy(
    text: &str,
) -> Result<BTreeMap<DomainLabel, Option<DomainLabel>>, InventoryError> {
    let mut parents: BTreeMap<DomainLabel, Option<DomainLabel>> = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let malformed = |reason: &str| InventoryError::Malformed {
            file: "hierarchy file",
            line,
            reason: reason.into(),
        };
        let (child, parent) = raw
            .split_once('\t')
            .ok_or_else(|| malformed("expected <child>\\t<parent>"))?;
        let child = DomainLabel::new(child).ok_or_else(|| malformed("empty child label"))?;
        let parent = match parent.trim() {
            "-" => None,
            p => Some(DomainLabel::new(p).ok_or_else(|| malformed("empty parent label"))?),
        };
        match parents.get(&child) {
            Some(existing) if *existing != parent => {
                let show = |p: &Option<DomainLabel>| p.as_ref().map_or("-".into(), |l| l.to_string());
                return Err(InventoryError::ConflictingParent {
                    label: child.to_string(),
                    first: show(existing),
                    second: show(&parent),
                });
            }
            _ => {
                parents.insert(child, parent);
            }
        }
    }
    // Parents never listed as children are implicit roots.
    let implicit: Vec<DomainLabel> = parents
        .values()
        .flatten()
        .filter(|p| !parents.contains_key(*p))
        .cloned()
        .collect();
    for root in implicit {
        parents.insert(root, None);
    }
    Ok(parents)
}

fn check_acyclic(parents: &BTreeMap<DomainLabel, Option<DomainLabel>>) -> Result<(), InventoryError> {
    let mut known_ok: HashSet<&DomainLabel> = HashSet::new();
    for start in parents.keys() {
        let mut path: HashSet<&DomainLabel> = HashSet::new();
        let mut cur = start;
        loop {
            if known_ok.contains(cur) {
                break;
            }
            if !path.insert(cur) {
                return Err(InventoryError::Cycle(cur.to_string()));
            }
            match parents.get(cur) {
                Some(Some(parent)) => cur = parent,
                _ => break,
            }
        }
        known_ok.extend(path);
    }
    Ok(())
}
