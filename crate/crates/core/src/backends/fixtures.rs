//! Record/replay fixtures.
//!
//! A fixture is one JSON line `{key, request, responses}` where `key` is
//! the hex SHA-256 of the normalized request (texts whitespace-collapsed,
//! sampling parameters included). Replay lookups are exact; a miss is an
//! error so untracked prompts fail loudly.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    BackendError, Embedder, EntailmentClassifier, GenerationRequest, Generator, NliVerdict,
};

/// Default width of [`HashedEmbedder`] vectors.
pub const HASHED_DIMENSION: usize = 8192;

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FixtureRequest {
    Generate {
        prompt: String,
        sample_count: usize,
        temperature: f64,
        max_tokens: usize,
        stop: Vec<String>,
    },
    Embed {
        text: String,
    },
    Nli {
        premise: String,
        hypothesis: String,
    },
}

impl FixtureRequest {
    pub fn generate(req: &GenerationRequest) -> Self {
        FixtureRequest::Generate {
            prompt: collapse_whitespace(&req.prompt),
            sample_count: req.sample_count,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            stop: req.stop.clone(),
        }
    }

    pub fn embed(text: &str) -> Self {
        FixtureRequest::Embed {
            text: collapse_whitespace(text),
        }
    }

    pub fn nli(premise: &str, hypothesis: &str) -> Self {
        FixtureRequest::Nli {
            premise: collapse_whitespace(premise),
            hypothesis: collapse_whitespace(hypothesis),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FixtureRequest::Generate { .. } => "generate",
            FixtureRequest::Embed { .. } => "embed",
            FixtureRequest::Nli { .. } => "nli",
        }
    }

    pub fn key(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("fixture requests serialize");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub key: String,
    pub request: FixtureRequest,
    pub responses: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl FixtureRecord {
    pub fn new(request: FixtureRequest, responses: Vec<Value>) -> Self {
        FixtureRecord {
            key: request.key(),
            request,
            responses,
            latency_ms: None,
        }
    }
}

/// In-memory fixture index, ordered by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureStore {
    records: BTreeMap<String, FixtureRecord>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.jsonl` file in `dir`, in file-name order.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, BackendError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
            .collect();
        paths.sort();
        let mut store = FixtureStore::new();
        for path in paths {
            store.load_file(&path)?;
        }
        Ok(store)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), BackendError> {
        let reader = BufReader::new(fs::File::open(path)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                BackendError::Format(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            if record.key != record.request.key() {
                return Err(BackendError::Format(format!(
                    "{}:{}: key does not match request",
                    path.display(),
                    lineno + 1
                )));
            }
            self.records.entry(record.key.clone()).or_insert(record);
        }
        Ok(())
    }

    /// Inserts `record` unless its key is already present; returns whether it was new.
    pub fn insert(&mut self, record: FixtureRecord) -> bool {
        if self.records.contains_key(&record.key) {
            return false;
        }
        self.records.insert(record.key.clone(), record);
        true
    }

    pub fn get(&self, request: &FixtureRequest) -> Option<&FixtureRecord> {
        self.records.get(&request.key())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &FixtureRecord> {
        self.records.values()
    }

    /// Writes `generate.jsonl`, `embed.jsonl` and `nli.jsonl` sorted by key.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), BackendError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for kind in ["generate", "embed", "nli"] {
            let mut out = String::new();
            for record in self.records.values().filter(|r| r.request.kind() == kind) {
                out.push_str(&serde_json::to_string(record).expect("records serialize"));
                out.push('\n');
            }
            let path = dir.join(format!("{kind}.jsonl"));
            if out.is_empty() {
                if path.exists() {
                    fs::remove_file(path)?;
                }
            } else {
                fs::write(path, out)?;
            }
        }
        Ok(())
    }
}

pub struct ReplayGenerator {
    store: Arc<FixtureStore>,
}

impl ReplayGenerator {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        ReplayGenerator { store }
    }
}

impl Generator for ReplayGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        req.validate()?;
        let request = FixtureRequest::generate(req);
        let record = self.store.get(&request).ok_or_else(|| BackendError::FixtureMiss {
            kind: "generate",
            key: request.key(),
        })?;
        record
            .responses
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| BackendError::Format(format!("non-string completion in {}", record.key)))
            })
            .collect()
    }
}

/// Deterministic bag-of-words embedding: each lowercase alphanumeric token
/// adds 1 to the bucket chosen by its SHA-256 hash.
///
/// Identical texts embed identically, texts sharing words have positive
/// cosine similarity, and texts with disjoint vocabularies are orthogonal
/// unless two of their words share a bucket.
#[derive(Debug, Clone, Copy)]
pub struct HashedEmbedder {
    pub dimension: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        HashedEmbedder {
            dimension: HASHED_DIMENSION,
        }
    }
}

impl HashedEmbedder {
    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    pub fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(head) % self.dimension as u64) as usize
    }
}

impl Embedder for HashedEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidInput("cannot embed empty text".into()));
        }
        let mut v = vec![0.0; self.dimension];
        for token in Self::tokens(text) {
            v[self.bucket(&token)] += 1.0;
        }
        Ok(v)
    }
}

/// Uses recorded embeddings when present, the hashed embedding otherwise.
pub struct ReplayEmbedder {
    store: Arc<FixtureStore>,
    fallback: HashedEmbedder,
}

impl ReplayEmbedder {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        ReplayEmbedder {
            store,
            fallback: HashedEmbedder::default(),
        }
    }

    pub fn with_fallback(mut self, fallback: HashedEmbedder) -> Self {
        self.fallback = fallback;
        self
    }
}

impl Embedder for ReplayEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        match self.store.get(&FixtureRequest::embed(text)) {
            Some(record) => {
                let vector = record.responses.first().cloned().unwrap_or(Value::Null);
                serde_json::from_value(vector)
                    .map_err(|e| BackendError::Format(format!("embedding {}: {e}", record.key)))
            }
            None => self.fallback.embed(text),
        }
    }
}

/// Replays recorded verdicts; a statement always entails itself.
pub struct ReplayClassifier {
    store: Arc<FixtureStore>,
}

impl ReplayClassifier {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        ReplayClassifier { store }
    }
}

impl EntailmentClassifier for ReplayClassifier {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(BackendError::InvalidInput("premise and hypothesis must be non-empty".into()));
        }
        let request = FixtureRequest::nli(premise, hypothesis);
        if let Some(record) = self.store.get(&request) {
            let label = record.responses.first().and_then(Value::as_str).unwrap_or_default();
            return label.parse().map_err(BackendError::Format);
        }
        if collapse_whitespace(premise) == collapse_whitespace(hypothesis) {
            return Ok(NliVerdict::Entailment);
        }
        Err(BackendError::FixtureMiss {
            kind: "nli",
            key: request.key(),
        })
    }
}

/// Collects fixtures from live calls, optionally appending them to
/// `<dir>/<kind>.jsonl` as they arrive.
pub struct Recorder {
    dir: Option<PathBuf>,
    record_latency: bool,
    store: Mutex<FixtureStore>,
}

impl Recorder {
    pub fn in_memory() -> Self {
        Recorder {
            dir: None,
            record_latency: false,
            store: Mutex::new(FixtureStore::new()),
        }
    }

    /// Appends to files under `dir`, skipping keys that already exist there.
    pub fn to_dir(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let existing = FixtureStore::load_dir(&dir)?;
        Ok(Recorder {
            dir: Some(dir),
            record_latency: true,
            store: Mutex::new(existing),
        })
    }

    pub fn with_latency(mut self, record_latency: bool) -> Self {
        self.record_latency = record_latency;
        self
    }

    pub fn record(
        &self,
        request: FixtureRequest,
        responses: Vec<Value>,
        latency_ms: u64,
    ) -> Result<(), BackendError> {
        let mut record = FixtureRecord::new(request, responses);
        if self.record_latency {
            record.latency_ms = Some(latency_ms);
        }
        let mut store = self.store.lock().expect("recorder lock");
        if !store.insert(record.clone()) {
            return Ok(());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.jsonl", record.request.kind()));
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&record).expect("records serialize");
            writeln!(file, "{line}")?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> FixtureStore {
        self.store.lock().expect("recorder lock").clone()
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

pub struct CapturingGenerator<G> {
    inner: G,
    recorder: Arc<Recorder>,
}

impl<G> CapturingGenerator<G> {
    pub fn new(inner: G, recorder: Arc<Recorder>) -> Self {
        CapturingGenerator { inner, recorder }
    }
}

impl<G: Generator> Generator for CapturingGenerator<G> {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let start = Instant::now();
        let out = self.inner.generate(req)?;
        let responses = out.iter().cloned().map(Value::String).collect();
        self.recorder
            .record(FixtureRequest::generate(req), responses, elapsed_ms(start))?;
        Ok(out)
    }
}

pub struct CapturingEmbedder<E> {
    inner: E,
    recorder: Arc<Recorder>,
}

impl<E> CapturingEmbedder<E> {
    pub fn new(inner: E, recorder: Arc<Recorder>) -> Self {
        CapturingEmbedder { inner, recorder }
    }
}

impl<E: Embedder> Embedder for CapturingEmbedder<E> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let start = Instant::now();
        let out = self.inner.embed(text)?;
        let vector = serde_json::to_value(&out).expect("vectors serialize");
        self.recorder
            .record(FixtureRequest::embed(text), vec![vector], elapsed_ms(start))?;
        Ok(out)
    }
}

pub struct CapturingClassifier<C> {
    inner: C,
    recorder: Arc<Recorder>,
}

impl<C> CapturingClassifier<C> {
    pub fn new(inner: C, recorder: Arc<Recorder>) -> Self {
        CapturingClassifier { inner, recorder }
    }
}

impl<C: EntailmentClassifier> EntailmentClassifier for CapturingClassifier<C> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        let start = Instant::now();
        let out = self.inner.classify(premise, hypothesis)?;
        self.recorder.record(
            FixtureRequest::nli(premise, hypothesis),
            vec![Value::String(out.as_str().into())],
            elapsed_ms(start),
        )?;
        Ok(out)
    }
}
