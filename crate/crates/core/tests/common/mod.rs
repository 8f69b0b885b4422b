#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use policylogic::backends::fixtures::FixtureStore;
use policylogic::backends::{BackendError, Backends, GenerationRequest, Generator};
use policylogic::evaluation::model_choice::{ChoiceMode, ModelChoiceConfig};
use policylogic::scripted::ScriptBook;
use policylogic::{CaseInput, Engine, PipelineConfig};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(set: &str, file: &str) -> PathBuf {
    fixtures_dir().join(set).join(file)
}

pub fn script(set: &str) -> ScriptBook {
    ScriptBook::load(fixture(set, "script.json")).unwrap()
}

pub fn replay_store(set: &str) -> Arc<FixtureStore> {
    Arc::new(FixtureStore::load_dir(fixture(set, "replay")).unwrap())
}

pub fn replay_engine(set: &str) -> Engine {
    Engine::new(Backends::replay(replay_store(set)), PipelineConfig::default())
}

pub fn loan_case() -> CaseInput {
    serde_json::from_str(&std::fs::read_to_string(fixture("disaster_loan", "case.json")).unwrap()).unwrap()
}

pub const LOAN_Q1: &str = "Do you need to repair or replace your primary residence?";
pub const LOAN_Q2: &str = "Do you need to repair or replace personal property?";

/// Sweep settings the model-choice fixture was recorded with.
pub fn model_choice_config(mode: ChoiceMode) -> ModelChoiceConfig {
    ModelChoiceConfig {
        ks: vec![0, 3, 20],
        runs: 2,
        seed: 17,
        mode,
        ..ModelChoiceConfig::default()
    }
}

/// Counts calls per prompt kind before delegating.
pub struct CountingGenerator<G> {
    pub inner: G,
    pub calls: AtomicUsize,
    pub filter_calls: AtomicUsize,
}

impl<G> CountingGenerator<G> {
    pub fn new(inner: G) -> Self {
        CountingGenerator {
            inner,
            calls: AtomicUsize::new(0),
            filter_calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn filter_calls(&self) -> usize {
        self.filter_calls.load(Ordering::SeqCst)
    }
}

impl<G: Generator> Generator for CountingGenerator<G> {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let filter_head = policylogic::prompts::FILTER_TEMPLATE.lines().next().unwrap_or_default();
        if req.prompt.starts_with(filter_head.trim()) {
            self.filter_calls.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.generate(req)
    }
}
