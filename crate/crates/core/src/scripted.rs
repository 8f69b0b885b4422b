//! A rule-driven stand-in for the language and entailment models.
//!
//! A [`ScriptBook`] describes, per policy, the questions a model should
//! decompose it into, the expression(s) it should write over them, which
//! questions the relevance filter rejects, and the entailment verdicts
//! for given scenarios. [`ScriptedModel`] answers the prompts this crate
//! renders accordingly. Wrapped in capturing backends, it produces the
//! replay fixtures used by tests and demos.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::fixtures::{CapturingClassifier, CapturingGenerator, FixtureStore, HashedEmbedder, Recorder};
use crate::backends::{BackendError, Backends, EntailmentClassifier, GenerationRequest, Generator, NliVerdict};
use crate::decomposition::{DecompositionError, ExemplarPool};
use crate::evaluation::model_choice::{run_model_choice, ModelChoiceConfig, RunResult};
use crate::evaluation::{run_sharc, CaseResult, Qa4pcItem, SharcUtterance};
use crate::logic::{parse, Formula, VarId};
use crate::pipeline::{explore_session, CaseInput, Engine, PipelineConfig, Session, SessionError};
use crate::prompts::{self, CANDIDATE_LABEL, INPUT_HEADER, STATEMENT_QUESTION_LABEL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptQuestion {
    pub text: String,
    /// Declarative rewrite; derived from the question when absent.
    #[serde(default)]
    pub statement: Option<String>,
    /// Answer given by the relevance filter.
    #[serde(default = "yes")]
    pub relevant: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedVerdict {
    pub scenario: String,
    /// Index into the script's questions.
    pub question: usize,
    pub verdict: NliVerdict,
}

/// Expressions in a script use `Q<i>` for the script's i-th question; they
/// are renumbered to whatever IDs the prompt assigned those questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyScript {
    pub policy: String,
    pub questions: Vec<ScriptQuestion>,
    pub formula: String,
    /// Logic completions to cycle through; defaults to `formula` repeated.
    /// Entries that do not parse are returned verbatim.
    #[serde(default)]
    pub samples: Vec<String>,
    #[serde(default)]
    pub verdicts: Vec<ScriptedVerdict>,
}

impl PolicyScript {
    pub fn statement(&self, index: usize) -> String {
        let q = &self.questions[index];
        q.statement.clone().unwrap_or_else(|| naive_statement(&q.text))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptBook {
    pub scripts: Vec<PolicyScript>,
}

impl ScriptBook {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| BackendError::Format(format!("{}: {e}", path.as_ref().display())))
    }
}

/// "Do you X?" → "You X.", "Are you X?" → "You are X.", and so on.
pub fn naive_statement(question: &str) -> String {
    let body = question.trim().trim_end_matches('?').trim();
    let rules = [
        ("Do you ", "You "),
        ("Are you ", "You are "),
        ("Have you ", "You have "),
        ("Did you ", "You did "),
        ("Were you ", "You were "),
        ("Can you ", "You can "),
        ("Will you ", "You will "),
    ];
    for (prefix, replacement) in rules {
        if let Some(rest) = body.strip_prefix(prefix) {
            return format!("{replacement}{rest}.");
        }
    }
    format!("It is true that {}.", body.trim_end_matches('.'))
}

pub struct ScriptedModel {
    book: ScriptBook,
}

fn miss(what: &str) -> BackendError {
    BackendError::FixtureMiss {
        kind: "script",
        key: what.chars().take(80).collect(),
    }
}

fn input_section(prompt: &str) -> &str {
    prompt.rfind(INPUT_HEADER).map_or(prompt, |i| &prompt[i..])
}

/// `Qi: text` lines listed under `Questions:` in the input block.
fn listed_questions(section: &str) -> Vec<(VarId, String)> {
    section
        .lines()
        .skip_while(|l| l.trim() != "Questions:")
        .skip(1)
        .take_while(|l| !l.starts_with(prompts::EXPRESSION_LABEL))
        .filter_map(|l| {
            let (id, text) = l.split_once(": ")?;
            Some((VarId::new(id.trim()).ok()?, text.trim().to_owned()))
        })
        .collect()
}

fn prune(f: &Formula, present: &HashMap<VarId, VarId>) -> Option<Formula> {
    match f {
        Formula::Var(id) => present.get(id).cloned().map(Formula::Var),
        Formula::Not(inner) => prune(inner, present).map(Formula::negate),
        Formula::And(l, r) | Formula::Or(l, r) => {
            let join = |a: Formula, b: Formula| if matches!(f, Formula::And(..)) { a.and(b) } else { a.or(b) };
            match (prune(l, present), prune(r, present)) {
                (Some(a), Some(b)) => Some(join(a, b)),
                (one, None) | (None, one) => one,
            }
        }
    }
}

impl ScriptedModel {
    pub fn new(book: ScriptBook) -> Self {
        ScriptedModel { book }
    }

    fn script_for(&self, section: &str) -> Result<&PolicyScript, BackendError> {
        self.book
            .scripts
            .iter()
            .filter(|s| section.contains(s.policy.trim()))
            .max_by_key(|s| s.policy.len())
            .ok_or_else(|| miss(section.lines().nth(1).unwrap_or(section)))
    }

    fn find_question(&self, text: &str) -> Option<(&PolicyScript, usize)> {
        self.book.scripts.iter().find_map(|s| {
            s.questions
                .iter()
                .position(|q| q.text.trim() == text.trim())
                .map(|i| (s, i))
        })
    }

    fn decompose(&self, prompt: &str) -> Result<Vec<String>, BackendError> {
        let section = input_section(prompt);
        let script = self.script_for(section)?;
        let known = listed_questions(section);
        let mut next = known.len();
        let mut out = String::new();
        for q in &script.questions {
            if known.iter().all(|(_, text)| text != q.text.trim()) {
                out.push_str(&format!("Q{next}: {}\n", q.text.trim()));
                next += 1;
            }
        }
        Ok(vec![out])
    }

    fn formulate(&self, prompt: &str, count: usize) -> Result<Vec<String>, BackendError> {
        let section = input_section(prompt);
        let script = self.script_for(section)?;
        let listed = listed_questions(section);
        let mapping: HashMap<VarId, VarId> = script
            .questions
            .iter()
            .enumerate()
            .filter_map(|(i, q)| {
                let (id, _) = listed.iter().find(|(_, text)| text == q.text.trim())?;
                Some((VarId::question(i), id.clone()))
            })
            .collect();
        let samples = if script.samples.is_empty() {
            std::slice::from_ref(&script.formula)
        } else {
            &script.samples[..]
        };
        Ok((0..count)
            .map(|n| {
                let raw = &samples[n % samples.len()];
                match parse(raw) {
                    Ok(f) => prune(&f, &mapping)
                        .or_else(|| Formula::conjunction(listed.iter().map(|(id, _)| id.clone())))
                        .map_or_else(String::new, |f| f.to_string()),
                    Err(_) => raw.clone(),
                }
            })
            .collect())
    }

    fn labelled<'p>(prompt: &'p str, label: &str) -> Option<&'p str> {
        prompt.lines().rev().find_map(|l| l.strip_prefix(label)).map(str::trim)
    }
}

impl Generator for ScriptedModel {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        req.validate()?;
        let prompt = req.prompt.as_str();
        let first_line = |t: &str| t.lines().next().unwrap_or_default().trim().to_owned();
        if prompt.starts_with(prompts::DECOMPOSITION_INSTRUCTION.trim()) {
            self.decompose(prompt)
        } else if prompt.starts_with(prompts::LOGIC_INSTRUCTION.trim()) {
            self.formulate(prompt, req.sample_count)
        } else if prompt.starts_with(&first_line(prompts::STATEMENT_TEMPLATE)) {
            let question = Self::labelled(prompt, STATEMENT_QUESTION_LABEL).ok_or_else(|| miss(prompt))?;
            Ok(vec![match self.find_question(question) {
                Some((script, i)) => script.statement(i),
                None => naive_statement(question),
            }])
        } else if prompt.starts_with(&first_line(prompts::FILTER_TEMPLATE)) {
            let candidate = Self::labelled(prompt, CANDIDATE_LABEL).ok_or_else(|| miss(prompt))?;
            let relevant = self.find_question(candidate).is_none_or(|(s, i)| s.questions[i].relevant);
            Ok(vec![if relevant { "Yes" } else { "No" }.to_owned()])
        } else {
            Err(miss(prompt))
        }
    }
}

impl EntailmentClassifier for ScriptedModel {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        if premise.trim() == hypothesis.trim() {
            return Ok(NliVerdict::Entailment);
        }
        for script in &self.book.scripts {
            for (i, _) in script.questions.iter().enumerate() {
                if script.statement(i).trim() != hypothesis.trim() {
                    continue;
                }
                if let Some(v) = script
                    .verdicts
                    .iter()
                    .find(|v| v.question == i && v.scenario.trim() == premise.trim())
                {
                    return Ok(v.verdict);
                }
            }
        }
        Ok(NliVerdict::Neutral)
    }
}

/// Scripted generation and entailment with the hashed embedder.
pub fn scripted_backends(book: ScriptBook) -> Backends {
    let model = Arc::new(ScriptedModel::new(book));
    Backends::new(model.clone(), Arc::new(HashedEmbedder::default()), model)
}

/// Like [`scripted_backends`], with generation and entailment calls
/// recorded. Embeddings are not recorded: replay recomputes the same
/// hashed vectors.
pub fn recording_backends(book: ScriptBook, recorder: Arc<Recorder>) -> Backends {
    let model = Arc::new(ScriptedModel::new(book));
    Backends::new(
        Arc::new(CapturingGenerator::new(model.clone(), recorder.clone())),
        Arc::new(HashedEmbedder::default()),
        Arc::new(CapturingClassifier::new(model, recorder)),
    )
}

fn recording_engine(book: &ScriptBook, config: &PipelineConfig) -> (Engine, Arc<Recorder>) {
    let recorder = Arc::new(Recorder::in_memory().with_latency(false));
    let engine = Engine::new(recording_backends(book.clone(), recorder.clone()), config.clone());
    (engine, recorder)
}

/// Records every session reachable from each case within `max_turns`
/// answers. Session IDs are `s1`, `s2`, ... in case order.
pub fn record_sessions(
    book: &ScriptBook,
    config: &PipelineConfig,
    cases: &[CaseInput],
    max_turns: usize,
) -> Result<(FixtureStore, Vec<Session>), SessionError> {
    let (engine, recorder) = recording_engine(book, config);
    let mut sessions = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        sessions.extend(explore_session(&engine, &format!("s{}", i + 1), case.clone(), max_turns)?);
    }
    Ok((recorder.snapshot(), sessions))
}

pub fn record_sharc(
    book: &ScriptBook,
    config: &PipelineConfig,
    utterances: &[SharcUtterance],
) -> (FixtureStore, Vec<CaseResult>) {
    let (engine, recorder) = recording_engine(book, config);
    let results = run_sharc(&engine, utterances, None);
    (recorder.snapshot(), results)
}

pub fn record_model_choice(
    book: &ScriptBook,
    items: &[Qa4pcItem],
    pool: &ExemplarPool,
    config: &ModelChoiceConfig,
) -> Result<(FixtureStore, Vec<RunResult>), DecompositionError> {
    let recorder = Arc::new(Recorder::in_memory().with_latency(false));
    let generator = CapturingGenerator::new(ScriptedModel::new(book.clone()), recorder.clone());
    let runs = run_model_choice(&generator, items, pool, config)?;
    Ok((recorder.snapshot(), runs))
}
