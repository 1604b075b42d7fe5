//! Manifest-driven runs: load inputs, predict, evaluate, write artifacts.
//!
//! A run writes three files to its output directory:
//! `predictions.jsonl`, `run_metadata.json` and `report.json`. The score
//! cache lives there too unless the manifest points elsewhere.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain_labelling::{DlError, GlossLabeller, HintsMode};
use crate::eval::{self, EvalError, EvalReport};
use crate::inventory::{DomainInventory, InventoryError};
use crate::lexicon::{self, DatasetError, Lexicon, LexiconError};
use crate::metadata::{BaselineSummary, RunMetadata, Task};
use crate::prompts::{self, PromptError};
use crate::scoring::{ScoreCache, ScoreError, Scorer, ScorerConfig, ScorerKind};
use crate::wsd::{self, Disambiguator, WordBinding, WsdError};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const METADATA_FILE: &str = "run_metadata.json";
pub const REPORT_FILE: &str = "report.json";
pub const CACHE_FILE: &str = "score_cache.jsonl";

/// Environment variable that replaces a remote scorer's endpoint.
pub const ENDPOINT_ENV: &str = "DOMWSD_SCORER_ENDPOINT";

fn default_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub task: Task,
    /// Required for WSD only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    pub dataset: PathBuf,
    pub inventory: PathBuf,
    pub inventory_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_label: Option<String>,
    pub template_id: String,
    /// Extra template definitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub scorer: ScorerConfig,
    /// Domain labelling only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hints_mode: Option<HintsMode>,
    /// WSD only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_binding: Option<WordBinding>,
    #[serde(default)]
    pub force_scoring: bool,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo trials for the WSD random baseline; 0 disables it.
    #[serde(default = "default_trials")]
    pub baseline_trials: usize,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{field} path does not exist: {path}")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error("{field} is required for task {task}")]
    MissingField { field: &'static str, task: &'static str },
    #[error("{field} is not valid for task {task}")]
    UnexpectedField { field: &'static str, task: &'static str },
    #[error("truncate_depth needs a hierarchy")]
    TruncateWithoutHierarchy,
    #[error(transparent)]
    Scorer(ScoreError),
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Wsd => "wsd",
        Task::DomainLabelling => "domain_labelling",
    }
}

impl RunManifest {
    /// Parse a manifest; relative paths are taken relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|source| ManifestError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        m.resolve(base);
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.inventory);
        fix(&mut self.output_dir);
        for p in [
            &mut self.lexicon,
            &mut self.hierarchy,
            &mut self.templates,
            &mut self.cache,
            &mut self.scorer.fixture_path,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let task = task_name(self.task);
        match self.task {
            Task::Wsd => {
                if self.lexicon.is_none() {
                    return Err(ManifestError::MissingField { field: "lexicon", task });
                }
                if self.hints_mode.is_some() {
                    return Err(ManifestError::UnexpectedField { field: "hints_mode", task });
                }
            }
            Task::DomainLabelling => {
                if self.hints_mode.is_none() {
                    return Err(ManifestError::MissingField { field: "hints_mode", task });
                }
                for (set, field) in [
                    (self.lexicon.is_some(), "lexicon"),
                    (self.word_binding.is_some(), "word_binding"),
                    (self.force_scoring, "force_scoring"),
                ] {
                    if set {
                        return Err(ManifestError::UnexpectedField { field, task });
                    }
                }
            }
        }
        if self.truncate_depth.is_some() && self.hierarchy.is_none() {
            return Err(ManifestError::TruncateWithoutHierarchy);
        }
        let paths = [
            ("dataset", Some(&self.dataset)),
            ("inventory", Some(&self.inventory)),
            ("lexicon", self.lexicon.as_ref()),
            ("hierarchy", self.hierarchy.as_ref()),
            ("templates", self.templates.as_ref()),
            ("scorer.fixture_path", self.scorer.fixture_path.as_ref()),
        ];
        for (field, path) in paths {
            if let Some(p) = path.filter(|p| !p.exists()) {
                return Err(ManifestError::MissingPath { field, path: p.clone() });
            }
        }
        self.scorer.validate().map_err(ManifestError::Scorer)
    }

    /// Input files and their roles, for hashing.
    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v = vec![("dataset", self.dataset.as_path()), ("inventory", self.inventory.as_path())];
        let optional = [
            ("lexicon", &self.lexicon),
            ("hierarchy", &self.hierarchy),
            ("templates", &self.templates),
            ("scorer_fixture", &self.scorer.fixture_path),
        ];
        v.extend(optional.into_iter().filter_map(|(k, p)| p.as_deref().map(|p| (k, p))));
        v
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Wsd(#[from] WsdError),
    #[error(transparent)]
    Dl(#[from] DlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl PipelineError {
    /// Whether the run failed because the scorer did, rather than because
    /// of invalid input.
    pub fn is_scorer_failure(&self) -> bool {
        match self {
            PipelineError::Score(e)
            | PipelineError::Wsd(WsdError::Scoring { source: e, .. })
            | PipelineError::Dl(DlError::Scoring { source: e, .. }) => e.is_scorer_failure(),
            _ => false,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| PipelineError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| PipelineError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })
}

/// Knobs that affect execution but never the outputs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    /// Replaces the endpoint of a remote scorer.
    pub endpoint: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            endpoint: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub predictions_path: PathBuf,
    pub metadata_path: PathBuf,
    pub report_path: PathBuf,
    pub report: EvalReport,
    pub metadata: RunMetadata,
}

/// Load the inventory a manifest describes, truncated and with fallback.
pub fn load_inventory(m: &RunManifest) -> Result<DomainInventory, PipelineError> {
    let mut inv = DomainInventory::load(&m.inventory, &m.inventory_name, m.hierarchy.as_deref())?;
    if let Some(depth) = m.truncate_depth {
        inv = inv.truncate_hierarchy(depth)?;
    }
    if let Some(f) = &m.fallback_label {
        inv = inv.with_fallback(f)?;
    }
    Ok(inv)
}

pub fn build_scorer(m: &RunManifest, options: &RunOptions) -> Result<Scorer, PipelineError> {
    let mut config = m.scorer.clone();
    if config.kind == ScorerKind::Remote {
        if let Some(e) = &options.endpoint {
            config.endpoint = Some(e.clone());
        }
    }
    let cache_path = m.cache.clone().unwrap_or_else(|| m.output_dir.join(CACHE_FILE));
    if let Some(dir) = cache_path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(Scorer::from_config(&config)?
        .with_cache(ScoreCache::open(&cache_path)?)
        .with_workers(options.workers))
}

/// Execute a validated manifest and write its artifacts.
pub fn execute(m: &RunManifest, options: &RunOptions) -> Result<RunOutcome, PipelineError> {
    m.validate()?;
    let inventory = load_inventory(m)?;
    let extra = match &m.templates {
        Some(p) => prompts::load_templates(p)?,
        None => Vec::new(),
    };
    let template = prompts::find_template(&m.template_id, &extra)?;
    fs::create_dir_all(&m.output_dir).map_err(io_err(&m.output_dir))?;
    let scorer = build_scorer(m, options)?;

    let predictions_path = m.output_dir.join(PREDICTIONS_FILE);
    let (report, mut metadata) = match m.task {
        Task::Wsd => {
            let lex = Lexicon::load(m.lexicon.as_ref().expect("validated"))?;
            let data = lexicon::load_wsd_dataset(&m.dataset, &lex)?;
            let run = Disambiguator::new(&inventory, &template, &scorer)
                .with_mode(m.scorer.mode)
                .with_word_binding(m.word_binding.unwrap_or_default())
                .force_scoring(m.force_scoring)
                .run(&data)?;
            write_jsonl(&predictions_path, &run.predictions)?;
            let report = eval::score_wsd(&run.predictions, &data, &inventory)?;
            let mut metadata = run.metadata;
            if !data.is_empty() {
                metadata.random_baseline = Some(BaselineSummary {
                    analytic: wsd::random_baseline_analytic(&data, &inventory)?,
                    monte_carlo: match m.baseline_trials {
                        0 => None,
                        t => Some(wsd::random_baseline_mc(&data, &inventory, m.seed, t)?),
                    },
                });
            }
            (report, metadata)
        }
        Task::DomainLabelling => {
            let data = lexicon::load_gloss_dataset(&m.dataset)?;
            let run = GlossLabeller::new(&inventory, &template, &scorer, m.hints_mode.expect("validated"))
                .with_mode(m.scorer.mode)
                .run(&data)?;
            write_jsonl(&predictions_path, &run.predictions)?;
            let report = eval::score_domain_labelling(&run.predictions, &data, &inventory)?;
            (report, run.metadata)
        }
    };
    metadata.seed = Some(m.seed);
    let mut hashes = BTreeMap::new();
    for (role, path) in m.inputs() {
        hashes.insert(role.to_string(), sha256_file(path)?);
    }
    metadata.input_hashes = hashes;

    let metadata_path = m.output_dir.join(METADATA_FILE);
    let report_path = m.output_dir.join(REPORT_FILE);
    write_json(&metadata_path, &metadata)?;
    write_json(&report_path, &report)?;
    Ok(RunOutcome {
        predictions_path,
        metadata_path,
        report_path,
        report,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(task: Task) -> RunManifest {
        RunManifest {
            task,
            lexicon: None,
            dataset: "d.jsonl".into(),
            inventory: "inv.tsv".into(),
            inventory_name: "toy".into(),
            hierarchy: None,
            truncate_depth: None,
            fallback_label: None,
            template_id: "wsd_word".into(),
            templates: None,
            scorer: ScorerConfig::new(ScorerKind::Uniform),
            hints_mode: None,
            word_binding: None,
            force_scoring: false,
            seed: 0,
            baseline_trials: 10,
            output_dir: "out".into(),
            cache: None,
        }
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(Task::Wsd);
        m.lexicon = Some("lex.tsv".into());
        m.scorer = ScorerConfig::fixture("scores.jsonl");
        let path = dir.path().join("m.json");
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        let loaded = RunManifest::load(&path).unwrap();
        assert_eq!(loaded.dataset, dir.path().join("d.jsonl"));
        assert_eq!(loaded.lexicon.unwrap(), dir.path().join("lex.tsv"));
        assert_eq!(loaded.scorer.fixture_path.unwrap(), dir.path().join("scores.jsonl"));
        assert_eq!(loaded.output_dir, dir.path().join("out"));
    }

    #[test]
    fn task_specific_fields() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["d.jsonl", "inv.tsv", "lex.tsv"] {
            fs::write(dir.path().join(f), "").unwrap();
        }
        let mut wsd = manifest(Task::Wsd);
        wsd.resolve(dir.path());
        assert!(matches!(wsd.validate(), Err(ManifestError::MissingField { field: "lexicon", .. })));
        wsd.lexicon = Some(dir.path().join("lex.tsv"));
        wsd.validate().unwrap();
        wsd.hints_mode = Some(HintsMode::WithHints);
        assert!(matches!(wsd.validate(), Err(ManifestError::UnexpectedField { field: "hints_mode", .. })));

        let mut dl = manifest(Task::DomainLabelling);
        dl.resolve(dir.path());
        assert!(matches!(dl.validate(), Err(ManifestError::MissingField { field: "hints_mode", .. })));
        dl.hints_mode = Some(HintsMode::WithoutHints);
        dl.validate().unwrap();
        dl.word_binding = Some(WordBinding::Surface);
        assert!(matches!(dl.validate(), Err(ManifestError::UnexpectedField { .. })));
    }

    #[test]
    fn missing_paths_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(Task::Wsd);
        m.lexicon = Some("lex.tsv".into());
        m.resolve(dir.path());
        match m.validate() {
            Err(ManifestError::MissingPath { field, path }) => {
                assert_eq!(field, "dataset");
                assert!(path.ends_with("d.jsonl"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_manifest_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut v = serde_json::to_value(manifest(Task::Wsd)).unwrap();
        v["datset"] = "typo".into();
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(RunManifest::load(&path), Err(ManifestError::Json { .. })));
    }

    #[test]
    fn scorer_failures_are_classified() {
        let unavailable = ScoreError::Unavailable {
            indices: vec![0],
            attempts: 3,
            reason: "down".into(),
        };
        assert!(PipelineError::Wsd(WsdError::Scoring {
            instances: vec!["a".into()],
            source: unavailable
        })
        .is_scorer_failure());
        assert!(!PipelineError::Score(ScoreError::Config("x".into())).is_scorer_failure());
        assert!(!PipelineError::Manifest(ManifestError::TruncateWithoutHierarchy).is_scorer_failure());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        write_jsonl(&path, &[1.5f64, 0.1, 1e-300]).unwrap();
        assert_eq!(read_jsonl::<f64>(&path).unwrap(), vec![1.5, 0.1, 1e-300]);
        fs::write(&path, "1\n{\n").unwrap();
        assert!(matches!(read_jsonl::<f64>(&path), Err(PipelineError::Json { line: 2, .. })));
    }
}
