//! Interfaces to the neural capabilities the pipeline consumes: text
//! generation, sentence embedding and entailment classification.
//!
//! Each capability has a remote HTTP implementation ([`remote`]) and a
//! deterministic replay implementation backed by recorded fixtures
//! ([`fixtures`]). [`CapturingGenerator`] and friends wrap any
//! implementation and record every call as a replay fixture.

pub mod fixtures;
pub mod remote;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fixtures::{
    CapturingClassifier, CapturingEmbedder, CapturingGenerator, FixtureRecord, FixtureRequest,
    FixtureStore, HashedEmbedder, Recorder, ReplayClassifier, ReplayEmbedder, ReplayGenerator,
};
pub use remote::{ChatCompletionsGenerator, HttpEmbedder, HttpEntailmentClassifier};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("network error talking to {endpoint}: {detail}")]
    Network { endpoint: String, detail: String },
    #[error("authentication rejected by {endpoint} (HTTP {status})")]
    Auth { endpoint: String, status: u16 },
    #[error("HTTP {status} from {endpoint}: {body}")]
    Http {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("malformed response from {endpoint}: {detail}")]
    Protocol { endpoint: String, detail: String },
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("no replay fixture for {kind} request {key}")]
    FixtureMiss { kind: &'static str, key: String },
    #[error("invalid backend input: {0}")]
    InvalidInput(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("fixture I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture format: {0}")]
    Format(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Timeout { .. } | BackendError::Network { .. } => true,
            BackendError::Http { status, .. } => matches!(status, 408 | 429 | 500..=599),
            _ => false,
        }
    }

    pub fn is_fixture_miss(&self) -> bool {
        matches!(self, BackendError::FixtureMiss { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub sample_count: usize,
    pub temperature: f64,
    pub max_tokens: usize,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            sample_count: 1,
            temperature: 0.0,
            max_tokens: 512,
            stop: Vec::new(),
        }
    }

    pub fn samples(mut self, count: usize) -> Self {
        self.sample_count = count;
        self
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn stop(mut self, stop: Vec<String>) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.sample_count == 0 {
            return Err(BackendError::InvalidInput("sample_count must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidInput("temperature must be non-negative".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidInput("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliVerdict {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            NliVerdict::Entailment => "entailment",
            NliVerdict::Contradiction => "contradiction",
            NliVerdict::Neutral => "neutral",
        }
    }
}

impl fmt::Display for NliVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliVerdict {
    type Err = String;

    /// Accepts the common label spellings used by NLI model servers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entails" | "entailed" => Ok(NliVerdict::Entailment),
            "contradiction" | "contradicts" => Ok(NliVerdict::Contradiction),
            "neutral" => Ok(NliVerdict::Neutral),
            other => Err(format!("unknown NLI label {other:?}")),
        }
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

pub trait EntailmentClassifier: Send + Sync {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError>;
}

impl<T: Generator + ?Sized> Generator for Arc<T> {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed(text)
    }
}

impl<T: EntailmentClassifier + ?Sized> EntailmentClassifier for Arc<T> {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        (**self).classify(premise, hypothesis)
    }
}

/// Connection settings for one remote endpoint.
///
/// `api_key_env` names the environment variable holding the bearer token;
/// secrets never appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Expected embedding width; checked on every response when set.
    #[serde(default)]
    pub dimension: Option<usize>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            dimension: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.endpoint.trim().is_empty() {
            return Err(BackendError::Config("endpoint is empty".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(BackendError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn api_key(&self) -> Result<Option<String>, BackendError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::MissingCredential(var.clone())),
        }
    }
}

/// Endpoint settings for all three capabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSettings {
    pub generation: BackendConfig,
    pub embedding: BackendConfig,
    pub nli: BackendConfig,
}

/// The three capabilities as used by the pipeline.
#[derive(Clone)]
pub struct Backends {
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
    pub nli: Arc<dyn EntailmentClassifier>,
}

impl Backends {
    pub fn new(
        generator: Arc<dyn Generator>,
        embedder: Arc<dyn Embedder>,
        nli: Arc<dyn EntailmentClassifier>,
    ) -> Self {
        Backends {
            generator,
            embedder,
            nli,
        }
    }

    pub fn live(settings: &BackendSettings) -> Result<Self, BackendError> {
        Ok(Backends {
            generator: Arc::new(ChatCompletionsGenerator::new(settings.generation.clone())?),
            embedder: Arc::new(HttpEmbedder::new(settings.embedding.clone())?),
            nli: Arc::new(HttpEntailmentClassifier::new(settings.nli.clone())?),
        })
    }

    pub fn replay(store: Arc<FixtureStore>) -> Self {
        Backends {
            generator: Arc::new(ReplayGenerator::new(store.clone())),
            embedder: Arc::new(ReplayEmbedder::new(store.clone())),
            nli: Arc::new(ReplayClassifier::new(store)),
        }
    }

    /// Wraps every capability so its calls are recorded by `recorder`.
    pub fn capturing(self, recorder: Arc<Recorder>) -> Self {
        Backends {
            generator: Arc::new(CapturingGenerator::new(self.generator, recorder.clone())),
            embedder: Arc::new(CapturingEmbedder::new(self.embedder, recorder.clone())),
            nli: Arc::new(CapturingClassifier::new(self.nli, recorder)),
        }
    }
}
