//! HTTP implementations of the backend traits.
//!
//! Generation speaks the chat-completions wire format, embeddings the
//! `/embeddings` format (`{model, input}` → `data[0].embedding`), and
//! entailment a small JSON API (`{model, premise, hypothesis}` →
//! `{label}` or a list of `{label, score}`).

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{
    BackendConfig, BackendError, Embedder, EntailmentClassifier, GenerationRequest, Generator,
    NliVerdict,
};

const MAX_BACKOFF: Duration = Duration::from_secs(8);

struct Transport {
    cfg: BackendConfig,
    client: Client,
    api_key: Option<String>,
    backoff: Duration,
}

impl Transport {
    fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let api_key = cfg.api_key()?;
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Transport {
            cfg,
            client,
            api_key,
            backoff: Duration::from_millis(250),
        })
    }

    fn attempt(&self, body: &Value) -> Result<Value, BackendError> {
        let endpoint = &self.cfg.endpoint;
        let mut req = self.client.post(endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout {
                    endpoint: endpoint.clone(),
                }
            } else {
                BackendError::Network {
                    endpoint: endpoint.clone(),
                    detail: e.to_string(),
                }
            }
        })?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(BackendError::Auth {
                endpoint: endpoint.clone(),
                status,
            });
        }
        if !resp.status().is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError::Http {
                endpoint: endpoint.clone(),
                status,
                body: body.chars().take(500).collect(),
            });
        }
        resp.json().map_err(|e| BackendError::Protocol {
            endpoint: endpoint.clone(),
            detail: e.to_string(),
        })
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(body) {
                Err(e) if e.is_retryable() && attempt < self.cfg.retries => {
                    tracing::warn!(endpoint = %self.cfg.endpoint, attempt, error = %e, "retrying");
                    thread::sleep(delay);
                    delay = (delay * 2).min(MAX_BACKOFF);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn protocol(&self, detail: impl Into<String>) -> BackendError {
        BackendError::Protocol {
            endpoint: self.cfg.endpoint.clone(),
            detail: detail.into(),
        }
    }
}

pub struct ChatCompletionsGenerator {
    transport: Transport,
}

impl ChatCompletionsGenerator {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        Ok(ChatCompletionsGenerator {
            transport: Transport::new(cfg)?,
        })
    }
}

impl Generator for ChatCompletionsGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        req.validate()?;
        let mut body = json!({
            "model": self.transport.cfg.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "n": req.sample_count,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if !req.stop.is_empty() {
            body["stop"] = json!(req.stop);
        }
        let resp = self.transport.post(&body)?;
        let choices = resp
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| self.transport.protocol("missing choices"))?;
        let mut out: Vec<String> = choices
            .iter()
            .map(|c| {
                c.pointer("/message/content")
                    .or_else(|| c.get("text"))
                    .and_then(Value::as_str)
                    .map(str::to_owned)
                    .ok_or_else(|| self.transport.protocol("choice without content"))
            })
            .collect::<Result<_, _>>()?;
        if out.is_empty() {
            return Err(self.transport.protocol("no choices returned"));
        }
        if out.len() < req.sample_count {
            tracing::warn!(
                requested = req.sample_count,
                received = out.len(),
                "endpoint returned fewer completions than requested"
            );
        }
        out.truncate(req.sample_count);
        Ok(out)
    }
}

pub struct HttpEmbedder {
    transport: Transport,
}

impl HttpEmbedder {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        Ok(HttpEmbedder {
            transport: Transport::new(cfg)?,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidInput("cannot embed empty text".into()));
        }
        let resp = self.transport.post(&json!({
            "model": self.transport.cfg.model,
            "input": text,
        }))?;
        let vector = resp
            .pointer("/data/0/embedding")
            .or_else(|| resp.get("embedding"))
            .and_then(Value::as_array)
            .ok_or_else(|| self.transport.protocol("missing embedding"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| self.transport.protocol("non-numeric embedding")))
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(dim) = self.transport.cfg.dimension {
            if vector.len() != dim {
                return Err(self.transport.protocol(format!(
                    "expected {dim}-dimensional embedding, got {}",
                    vector.len()
                )));
            }
        }
        Ok(vector)
    }
}

pub struct HttpEntailmentClassifier {
    transport: Transport,
}

impl HttpEntailmentClassifier {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        Ok(HttpEntailmentClassifier {
            transport: Transport::new(cfg)?,
        })
    }

    fn label(&self, resp: &Value) -> Result<String, BackendError> {
        if let Some(label) = resp.get("label").and_then(Value::as_str) {
            return Ok(label.to_owned());
        }
        // [{label, score}, ...], possibly nested one level as some servers batch.
        let scored = match resp.as_array() {
            Some(items) if items.first().is_some_and(Value::is_array) => {
                items[0].as_array().cloned().unwrap_or_default()
            }
            Some(items) => items.clone(),
            None => return Err(self.transport.protocol("missing label")),
        };
        scored
            .iter()
            .filter_map(|item| {
                Some((
                    item.get("label")?.as_str()?.to_owned(),
                    item.get("score")?.as_f64()?,
                ))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(label, _)| label)
            .ok_or_else(|| self.transport.protocol("no scored labels"))
    }
}

impl EntailmentClassifier for HttpEntailmentClassifier {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(BackendError::InvalidInput("premise and hypothesis must be non-empty".into()));
        }
        let resp = self.transport.post(&json!({
            "model": self.transport.cfg.model,
            "premise": premise,
            "hypothesis": hypothesis,
        }))?;
        let label = self.label(&resp)?;
        label.parse().map_err(|e: String| self.transport.protocol(e))
    }
}
