//! Sentence-pair scorers.
//!
//! Every backend maps a (premise, hypothesis) pair to one probability: the
//! entailment probability for NLI checkpoints, or the probability that the
//! hypothesis follows the premise for next-sentence checkpoints. [`Scorer`]
//! wraps a backend with batching, concurrent dispatch and a persistent cache.
//!
//! # Cache keys
//!
//! [`cache_key`] is the lowercase hex SHA-256 of the ASCII tag
//! `domwsd-score-v1`, a zero byte, and then, for each of scorer id, mode name
//! (`entailment` or `next_sentence`), premise and hypothesis, the field's UTF-8
//! byte length as a little-endian `u64` followed by its bytes. Caches are
//! therefore portable between machines.
//!
//! # Remote protocol
//!
//! `POST {endpoint}/v1/score` with
//! `{"mode": "entailment", "pairs": [{"premise": "...", "hypothesis": "..."}]}`
//! answered by `{"scores": [0.93, ...], "model_id": "..."}`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("invalid scorer configuration: {0}")]
    Config(String),
    #[error("request {index} has an empty premise or hypothesis")]
    EmptyText { index: usize },
    #[error("fixture has no score for premise {premise:?} / hypothesis {hypothesis:?}")]
    FixtureMiss { premise: String, hypothesis: String },
    #[error("scorer unavailable after {attempts} attempt(s) for request indices {}: {reason}", format_indices(.indices))]
    Unavailable {
        indices: Vec<usize>,
        attempts: u32,
        reason: String,
    },
    #[error("scorer rejected request indices {} with HTTP {status}: {body}", format_indices(.indices))]
    Rejected {
        indices: Vec<usize>,
        status: u16,
        body: String,
    },
    #[error("malformed scorer response: {0}")]
    MalformedResponse(String),
    #[error("scorer returned {0}, outside [0, 1]")]
    OutOfRange(f64),
    #[error("score cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScoreError {
    /// True for failures of the scorer itself, as opposed to bad
    /// configuration, input, or cache files.
    pub fn is_scorer_failure(&self) -> bool {
        matches!(
            self,
            ScoreError::FixtureMiss { .. }
                | ScoreError::Unavailable { .. }
                | ScoreError::Rejected { .. }
                | ScoreError::MalformedResponse(_)
                | ScoreError::OutOfRange(_)
        )
    }

    fn with_indices(self, idx: &[usize]) -> Self {
        match self {
            ScoreError::Unavailable {
                attempts, reason, ..
            } => ScoreError::Unavailable {
                indices: idx.to_vec(),
                attempts,
                reason,
            },
            ScoreError::Rejected { status, body, .. } => ScoreError::Rejected {
                indices: idx.to_vec(),
                status,
                body,
            },
            other => other,
        }
    }
}

/// Render sorted indices compactly, e.g. `0-3,7`.
fn format_indices(indices: &[usize]) -> String {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let start = sorted[i];
        let mut end = start;
        while i + 1 < sorted.len() && sorted[i + 1] == end + 1 {
            i += 1;
            end = sorted[i];
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
        i += 1;
    }
    parts.join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Entailment,
    NextSentence,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Entailment => "entailment",
            ScoreMode::NextSentence => "next_sentence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub premise: String,
    pub hypothesis: String,
    pub mode: ScoreMode,
}

impl ScoreRequest {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>, mode: ScoreMode) -> Self {
        ScoreRequest {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            mode,
        }
    }
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub key: String,
    pub scorer_id: String,
    #[serde(flatten)]
    pub request: ScoreRequest,
    pub probability: f64,
    pub timestamp: DateTime<Utc>,
}

pub fn cache_key(request: &ScoreRequest, scorer_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"domwsd-score-v1\0");
    for field in [
        scorer_id,
        request.mode.as_str(),
        &request.premise,
        &request.hypothesis,
    ] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Remote,
    Fixture,
    LexicalOverlap,
    Uniform,
}

fn default_batch_size() -> usize {
    32
}
fn default_timeout() -> f64 {
    30.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    #[serde(default)]
    pub mode: ScoreMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
    /// Overrides the derived scorer id (and so the cache namespace).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ScorerConfig {
    pub fn new(kind: ScorerKind) -> Self {
        ScorerConfig {
            kind,
            mode: ScoreMode::default(),
            endpoint: None,
            fixture_path: None,
            batch_size: default_batch_size(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff(),
            id: None,
        }
    }

    pub fn remote(endpoint: &str) -> Self {
        ScorerConfig {
            endpoint: Some(endpoint.into()),
            ..Self::new(ScorerKind::Remote)
        }
    }

    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        ScorerConfig {
            fixture_path: Some(path.into()),
            ..Self::new(ScorerKind::Fixture)
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let err = |m: &str| Err(ScoreError::Config(m.into()));
        match (self.kind, &self.endpoint, &self.fixture_path) {
            (ScorerKind::Remote, None, _) => return err("remote scorer needs an endpoint"),
            (ScorerKind::Fixture, _, None) => return err("fixture scorer needs a fixture_path"),
            (k, Some(_), _) if k != ScorerKind::Remote => {
                return err("endpoint is only valid for the remote scorer")
            }
            (k, _, Some(_)) if k != ScorerKind::Fixture => {
                return err("fixture_path is only valid for the fixture scorer")
            }
            _ => {}
        }
        if self.batch_size == 0 {
            return err("batch_size must be positive");
        }
        if !(self.timeout_secs > 0.0) {
            return err("timeout_secs must be positive");
        }
        Ok(())
    }
}

/// A scoring backend. Every request in one call shares the same mode.
pub trait ScoreBackend: Send + Sync {
    fn id(&self) -> String;

    fn score_chunk(&self, requests: &[&ScoreRequest]) -> Result<Vec<f64>, ScoreError>;

    /// Model identifier reported by a remote server, once seen.
    fn observed_model(&self) -> Option<String> {
        None
    }
}

/// Constant 0.5 for every pair.
pub struct UniformBackend;

impl ScoreBackend for UniformBackend {
    fn id(&self) -> String {
        "uniform".into()
    }

    fn score_chunk(&self, requests: &[&ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
        Ok(vec![0.5; requests.len()])
    }
}

static STOPWORDS_TXT: &str = include_str!("stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: std::sync::OnceLock<HashSet<&'static str>> = std::sync::OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.split_whitespace().collect())
}

fn content_tokens(text: &str) -> HashSet<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty() && !stopwords().contains(t))
        .map(str::to_string)
        .collect()
}

/// Jaccard overlap of lowercased alphabetic tokens, stopwords removed.
///
/// Offline stand-in for a real model so the pipeline can run end to end; its
/// scores carry no linguistic meaning beyond word overlap.
pub fn lexical_overlap(premise: &str, hypothesis: &str) -> f64 {
    let a = content_tokens(premise);
    let b = content_tokens(hypothesis);
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub struct LexicalOverlapBackend;

impl ScoreBackend for LexicalOverlapBackend {
    fn id(&self) -> String {
        "lexical_overlap".into()
    }

    fn score_chunk(&self, requests: &[&ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
        Ok(requests
            .iter()
            .map(|r| lexical_overlap(&r.premise, &r.hypothesis))
            .collect())
    }
}

/// One line of a fixture score file. `mode` is optional; a fixture entry
/// without a mode answers both modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub premise: String,
    pub hypothesis: String,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ScoreMode>,
}

/// Lookup table of precomputed scores.
pub struct FixtureBackend {
    id: String,
    table: HashMap<(Option<ScoreMode>, String, String), f64>,
}

impl FixtureBackend {
    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let text = fs::read_to_string(path).map_err(|source| ScoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| {
                ScoreError::Config(format!("{} line {}: {e}", path.display(), i + 1))
            })?;
            entries.push(entry);
        }
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        Self::from_entries(&format!("fixture:{}", &digest[..16]), entries)
    }

    pub fn from_entries(
        id: &str,
        entries: impl IntoIterator<Item = FixtureEntry>,
    ) -> Result<Self, ScoreError> {
        let mut table = HashMap::new();
        for e in entries {
            check_probability(e.probability)?;
            table.insert((e.mode, e.premise, e.hypothesis), e.probability);
        }
        Ok(FixtureBackend {
            id: id.into(),
            table,
        })
    }
}

impl ScoreBackend for FixtureBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn score_chunk(&self, requests: &[&ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
        requests
            .iter()
            .map(|r| {
                let lookup = |mode| {
                    self.table
                        .get(&(mode, r.premise.clone(), r.hypothesis.clone()))
                        .copied()
                };
                lookup(Some(r.mode))
                    .or_else(|| lookup(None))
                    .ok_or_else(|| ScoreError::FixtureMiss {
                        premise: r.premise.clone(),
                        hypothesis: r.hypothesis.clone(),
                    })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    mode: ScoreMode,
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<f64>,
    #[serde(default)]
    model_id: Option<String>,
}

/// HTTP client for the `/v1/score` protocol.
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    url: String,
    max_retries: u32,
    backoff: Duration,
    model_id: Mutex<Option<String>>,
}

impl RemoteBackend {
    pub fn new(
        endpoint: &str,
        timeout: Duration,
        max_retries: u32,
        backoff: Duration,
    ) -> Result<Self, ScoreError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScoreError::Config(format!("http client: {e}")))?;
        let endpoint = endpoint.trim_end_matches('/').to_string();
        Ok(RemoteBackend {
            client,
            url: format!("{endpoint}/v1/score"),
            endpoint,
            max_retries,
            backoff,
            model_id: Mutex::new(None),
        })
    }

    fn attempt(&self, body: &WireRequest<'_>, expected: usize) -> Attempt {
        let response = match self.client.post(&self.url).json(body).send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status();
        if status.is_success() {
            let parsed: WireResponse = match response.json() {
                Ok(p) => p,
                Err(e) => return Attempt::Fail(ScoreError::MalformedResponse(e.to_string())),
            };
            if parsed.scores.len() != expected {
                return Attempt::Fail(ScoreError::MalformedResponse(format!(
                    "expected {expected} scores, got {}",
                    parsed.scores.len()
                )));
            }
            if let Some(id) = parsed.model_id {
                *self.model_id.lock().expect("model id lock") = Some(id);
            }
            return Attempt::Done(parsed.scores);
        }
        let code = status.as_u16();
        let text = response.text().unwrap_or_default();
        if code == 429 || status.is_server_error() {
            Attempt::Retry(format!("HTTP {code}: {text}"))
        } else {
            Attempt::Fail(ScoreError::Rejected {
                indices: Vec::new(),
                status: code,
                body: text,
            })
        }
    }
}

enum Attempt {
    Done(Vec<f64>),
    Retry(String),
    Fail(ScoreError),
}

impl ScoreBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn score_chunk(&self, requests: &[&ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
        let Some(first) = requests.first() else {
            return Ok(Vec::new());
        };
        let body = WireRequest {
            mode: first.mode,
            pairs: requests
                .iter()
                .map(|r| WirePair {
                    premise: &r.premise,
                    hypothesis: &r.hypothesis,
                })
                .collect(),
        };
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let delay = self.backoff.saturating_mul(1 << (attempt - 1).min(16));
                log::warn!("retrying {} after {delay:?}: {last}", self.url);
                std::thread::sleep(delay);
            }
            match self.attempt(&body, requests.len()) {
                Attempt::Done(scores) => return Ok(scores),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason) => last = reason,
            }
        }
        Err(ScoreError::Unavailable {
            indices: Vec::new(),
            attempts: self.max_retries + 1,
            reason: last,
        })
    }

    fn observed_model(&self) -> Option<String> {
        self.model_id.lock().expect("model id lock").clone()
    }
}

fn check_probability(p: f64) -> Result<f64, ScoreError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ScoreError::OutOfRange(p))
    }
}

/// Score cache: an in-memory map, optionally backed by an append-only JSONL
/// file. Appends go through a single writer.
pub struct ScoreCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, f64>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        ScoreCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Open (or create) a cache file. A truncated final line, left by an
    /// interrupted run, is skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| ScoreError::Io {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;

        let mut entries = HashMap::new();
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ScoreRecord>(line) {
                Ok(rec) => {
                    if cache_key(&rec.request, &rec.scorer_id) != rec.key {
                        return Err(ScoreError::Cache {
                            path,
                            reason: format!("line {}: key does not match its content", i + 1),
                        });
                    }
                    entries.insert(rec.key, check_probability(rec.probability)?);
                }
                Err(e) if i + 1 == lines.len() && !text.ends_with('\n') => {
                    log::warn!("{}: skipping truncated final line: {e}", path.display());
                }
                Err(e) => {
                    return Err(ScoreError::Cache {
                        path,
                        reason: format!("line {}: {e}", i + 1),
                    })
                }
            }
        }
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }
        Ok(ScoreCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(BufWriter::new(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.read().expect("cache lock").get(key).copied()
    }

    fn insert_all(&self, records: &[ScoreRecord]) -> Result<(), ScoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(w) = writer.as_mut() {
            let path = self.path.clone().unwrap_or_default();
            let io = |source| ScoreError::Io {
                path: path.clone(),
                source,
            };
            for rec in records {
                let line = serde_json::to_string(rec).expect("score record serializes");
                w.write_all(line.as_bytes()).map_err(io)?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        let mut entries = self.entries.write().expect("cache lock");
        for rec in records {
            entries.insert(rec.key.clone(), rec.probability);
        }
        Ok(())
    }
}

struct Job<'a> {
    keys: Vec<&'a str>,
    requests: Vec<&'a ScoreRequest>,
    /// Caller positions covered by this job, for error reports.
    positions: Vec<usize>,
}

/// A backend plus batching, concurrency and caching.
pub struct Scorer {
    backend: Box<dyn ScoreBackend>,
    id: String,
    batch_size: usize,
    workers: usize,
    cache: ScoreCache,
    dispatched_requests: AtomicUsize,
    dispatched_batches: AtomicUsize,
}

impl Scorer {
    pub fn new(backend: Box<dyn ScoreBackend>, batch_size: usize) -> Self {
        let id = backend.id();
        Scorer {
            backend,
            id,
            batch_size: batch_size.max(1),
            workers: 1,
            cache: ScoreCache::in_memory(),
            dispatched_requests: AtomicUsize::new(0),
            dispatched_batches: AtomicUsize::new(0),
        }
    }

    pub fn from_config(config: &ScorerConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        let backend: Box<dyn ScoreBackend> = match config.kind {
            ScorerKind::Uniform => Box::new(UniformBackend),
            ScorerKind::LexicalOverlap => Box::new(LexicalOverlapBackend),
            ScorerKind::Fixture => Box::new(FixtureBackend::load(
                config.fixture_path.as_deref().expect("validated"),
            )?),
            ScorerKind::Remote => Box::new(RemoteBackend::new(
                config.endpoint.as_deref().expect("validated"),
                Duration::from_secs_f64(config.timeout_secs),
                config.max_retries,
                Duration::from_millis(config.retry_backoff_ms),
            )?),
        };
        let mut scorer = Scorer::new(backend, config.batch_size);
        if let Some(id) = &config.id {
            scorer.id = id.clone();
        }
        Ok(scorer)
    }

    pub fn with_cache(mut self, cache: ScoreCache) -> Self {
        self.cache = cache;
        self
    }

    /// Maximum number of batches in flight at once.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn observed_model(&self) -> Option<String> {
        self.backend.observed_model()
    }

    /// Number of pairs sent to the backend so far.
    pub fn dispatched_requests(&self) -> usize {
        self.dispatched_requests.load(Ordering::Relaxed)
    }

    pub fn dispatched_batches(&self) -> usize {
        self.dispatched_batches.load(Ordering::Relaxed)
    }

    /// One probability per request, in request order. Cached pairs are not
    /// re-dispatched and duplicate pairs are scored once. Newly scored pairs
    /// are appended to the cache even when another batch of the same call
    /// fails; the call itself then fails.
    pub fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
        for (index, r) in requests.iter().enumerate() {
            if r.premise.trim().is_empty() || r.hypothesis.trim().is_empty() {
                return Err(ScoreError::EmptyText { index });
            }
        }
        let keys: Vec<String> = requests.iter().map(|r| cache_key(r, &self.id)).collect();

        // Unique uncached keys, first-appearance order, grouped by mode.
        let mut pending: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for (i, key) in keys.iter().enumerate() {
            if self.cache.get(key).is_some() {
                continue;
            }
            match slot.get(key.as_str()) {
                Some(&s) => pending[s].1.push(i),
                None => {
                    slot.insert(key, pending.len());
                    pending.push((i, vec![i]));
                }
            }
        }
        let mut jobs = Vec::new();
        for mode in [ScoreMode::Entailment, ScoreMode::NextSentence] {
            let of_mode: Vec<_> = pending
                .iter()
                .filter(|(first, _)| requests[*first].mode == mode)
                .collect();
            for chunk in of_mode.chunks(self.batch_size) {
                jobs.push(Job {
                    keys: chunk.iter().map(|(f, _)| keys[*f].as_str()).collect(),
                    requests: chunk.iter().map(|(f, _)| &requests[*f]).collect(),
                    positions: chunk.iter().flat_map(|(_, all)| all.iter().copied()).collect(),
                });
            }
        }

        let results = self.dispatch(&jobs);

        let mut first_error = None;
        let mut records = Vec::new();
        let now = Utc::now();
        for (job, result) in jobs.iter().zip(results) {
            let scores = match result.and_then(|s| s.into_iter().map(check_probability).collect::<Result<Vec<_>, _>>()) {
                Ok(s) => s,
                Err(e) => {
                    first_error.get_or_insert(e.with_indices(&job.positions));
                    continue;
                }
            };
            for ((key, req), p) in job.keys.iter().zip(&job.requests).zip(scores) {
                records.push(ScoreRecord {
                    key: key.to_string(),
                    scorer_id: self.id.clone(),
                    request: (*req).clone(),
                    probability: p,
                    timestamp: now,
                });
            }
        }
        self.cache.insert_all(&records)?;
        if let Some(e) = first_error {
            return Err(e);
        }
        Ok(keys
            .iter()
            .map(|k| self.cache.get(k).expect("every key scored or cached"))
            .collect())
    }

    fn dispatch(&self, jobs: &[Job<'_>]) -> Vec<Result<Vec<f64>, ScoreError>> {
        let run = |job: &Job<'_>| {
            self.dispatched_batches.fetch_add(1, Ordering::Relaxed);
            self.dispatched_requests
                .fetch_add(job.requests.len(), Ordering::Relaxed);
            self.backend.score_chunk(&job.requests)
        };
        if self.workers == 1 || jobs.len() <= 1 {
            return jobs.iter().map(run).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Vec<f64>, ScoreError>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.workers.min(jobs.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    *slots[i].lock().expect("slot lock") = Some(run(job));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("job ran"))
            .collect()
    }
}

/// Score `requests` with a fresh scorer built from `config` (no file cache).
pub fn score_batch(config: &ScorerConfig, requests: &[ScoreRequest]) -> Result<Vec<f64>, ScoreError> {
    Scorer::from_config(config)?.score_batch(requests)
}
