//! End-to-end decision procedure for one case.
//!
//! 1. Relevance gate: embedding similarity below the threshold returns
//!    `Irrelevant` before any generation call.
//! 2. Decomposition: history questions become `Q0..`, the model adds the rest.
//! 3. Answers: history answers, otherwise scenario entailment.
//! 4. Filtering when there are at least five questions.
//! 5. `sample_size` logic formulations, reduced by self-consistency.
//! 6. Three-valued evaluation: `True` is Yes, `False` is No, `Maybe` asks
//!    the follow-up picked by breadth-first search over the `Maybe` subtree.

mod session;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use session::{explore_session, Session, SessionError, SessionStatus};

use crate::backends::{Backends, GenerationRequest};
use crate::consistency::{select_consistent_with, ConsistencyError, Diversity, RejectedSample, SampleSet};
use crate::decomposition::{
    decompose, filter_questions, DecompositionSettings, Exemplar, ExemplarPool, FilterDecision,
    QuestionSet,
};
use crate::logic::{evaluate, parse, select_follow_up, Assignment, Equivalence, Formula, TruthValue, VarId};
use crate::prompts::{self, PromptCase};
use crate::qa::{resolve_answers, AnswerDetail, ChatTurn};
use crate::relevance::{check_relevance, RelevanceVerdict, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseInput {
    pub policy: String,
    pub question: String,
    #[serde(default)]
    pub scenario: String,
    #[serde(default)]
    pub history: Vec<ChatTurn>,
}

impl CaseInput {
    pub fn new(policy: impl Into<String>, question: impl Into<String>) -> Self {
        CaseInput {
            policy: policy.into(),
            question: question.into(),
            scenario: String::new(),
            history: Vec::new(),
        }
    }

    pub fn with_scenario(mut self, scenario: impl Into<String>) -> Self {
        self.scenario = scenario.into();
        self
    }

    pub fn with_history(mut self, history: Vec<ChatTurn>) -> Self {
        self.history = history;
        self
    }

    fn prompt_case(&self) -> PromptCase<'_> {
        PromptCase {
            policy: &self.policy,
            question: &self.question,
            history: &self.history,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub threshold: f64,
    pub sample_size: usize,
    pub logic_temperature: f64,
    pub logic_max_tokens: usize,
    pub decomposition: DecompositionSettings,
    /// In-context examples for both prompting stages, in prompt order.
    pub exemplars: Vec<Exemplar>,
    pub equivalence: Equivalence,
    /// Sessions re-evaluate the previous formula instead of re-running
    /// decomposition and formulation after each answer.
    pub reuse_formula: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threshold: DEFAULT_THRESHOLD,
            sample_size: 3,
            logic_temperature: 0.7,
            logic_max_tokens: 128,
            decomposition: DecompositionSettings::default(),
            exemplars: ExemplarPool::builtin().exemplars,
            equivalence: Equivalence::default(),
            reuse_formula: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Relevance,
    Decomposition,
    Answering,
    Filtering,
    Formulation,
    Selection,
    Evaluation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("stage serializes");
        f.write_str(name.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn at<E>(stage: Stage) -> impl FnOnce(E) -> PipelineError
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        move |e| PipelineError {
            stage,
            source: Box::new(e),
        }
    }

    fn message(stage: Stage, message: impl Into<String>) -> PipelineError {
        PipelineError {
            stage,
            source: message.into().into(),
        }
    }

    /// Whether the root cause is a missing replay fixture.
    pub fn is_fixture_miss(&self) -> bool {
        use crate::backends::BackendError;
        use crate::decomposition::DecompositionError;
        use crate::qa::QaError;
        use crate::relevance::RelevanceError;

        let mut err: Option<&(dyn std::error::Error + 'static)> = Some(self.source.as_ref());
        while let Some(e) = err {
            let backend = e
                .downcast_ref::<BackendError>()
                .or_else(|| match e.downcast_ref::<DecompositionError>() {
                    Some(DecompositionError::Backend(b)) => Some(b),
                    _ => None,
                })
                .or_else(|| match e.downcast_ref::<QaError>() {
                    Some(QaError::Backend(b)) => Some(b),
                    _ => None,
                })
                .or_else(|| match e.downcast_ref::<RelevanceError>() {
                    Some(RelevanceError::Backend(b)) => Some(b),
                    _ => None,
                });
            if let Some(b) = backend {
                return b.is_fixture_miss();
            }
            err = e.source();
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Yes,
    No,
    Irrelevant,
    FollowUp,
}

impl DecisionKind {
    /// The only mapping from a formula's value to an answer.
    pub fn from_root(value: TruthValue) -> Self {
        match value {
            TruthValue::True => DecisionKind::Yes,
            TruthValue::False => DecisionKind::No,
            TruthValue::Maybe => DecisionKind::FollowUp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUp {
    pub id: VarId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedSample {
    pub raw: String,
    pub canonical: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTrace {
    /// Positions in `accepted`.
    pub members: Vec<usize>,
    pub representative: Formula,
}

/// The logic-formulation samples and how self-consistency resolved them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub completions: Vec<String>,
    pub accepted: Vec<AcceptedSample>,
    pub rejected: Vec<RejectedSample>,
    pub classes: Vec<ClassTrace>,
    pub chosen_class: Option<usize>,
    pub diversity: Option<Diversity>,
    /// Every sample was unusable and the conjunction fallback was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub relevance: RelevanceVerdict,
    #[serde(default)]
    pub decomposition_output: Option<String>,
    #[serde(default)]
    pub questions: Option<QuestionSet>,
    #[serde(default)]
    pub answers: Vec<AnswerDetail>,
    #[serde(default)]
    pub filter: Vec<FilterDecision>,
    #[serde(default)]
    pub assignment: Option<Assignment>,
    #[serde(default)]
    pub samples: Option<SampleTrace>,
    #[serde(default)]
    pub selected_formula: Option<Formula>,
    #[serde(default)]
    pub root_value: Option<TruthValue>,
}

impl DecisionTrace {
    fn irrelevant(relevance: RelevanceVerdict) -> Self {
        DecisionTrace {
            relevance,
            decomposition_output: None,
            questions: None,
            answers: Vec::new(),
            filter: Vec::new(),
            assignment: None,
            samples: None,
            selected_formula: None,
            root_value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    #[serde(default)]
    pub follow_up: Option<FollowUp>,
    pub trace: DecisionTrace,
}

impl Decision {
    /// Maps an evaluated formula to a decision, choosing the follow-up
    /// question when the value is `Maybe`.
    fn from_evaluation(mut trace: DecisionTrace, formula: &Formula, assignment: &Assignment) -> Result<Self, PipelineError> {
        let root = evaluate(formula, assignment).map_err(PipelineError::at(Stage::Evaluation))?;
        let kind = DecisionKind::from_root(root);
        let follow_up = if kind == DecisionKind::FollowUp {
            let id = select_follow_up(formula, assignment).map_err(PipelineError::at(Stage::Evaluation))?;
            let text = assignment.text(&id).unwrap_or_default().to_owned();
            Some(FollowUp { id, text })
        } else {
            None
        };
        trace.root_value = Some(root);
        trace.selected_formula = Some(formula.clone());
        Ok(Decision { kind, follow_up, trace })
    }
}

/// Backends plus configuration: everything needed to decide cases.
#[derive(Clone)]
pub struct Engine {
    pub backends: Backends,
    pub config: PipelineConfig,
}

impl Engine {
    pub fn new(backends: Backends, config: PipelineConfig) -> Self {
        Engine { backends, config }
    }

    pub fn decide(&self, case: &CaseInput) -> Result<Decision, PipelineError> {
        if case.policy.trim().is_empty() || case.question.trim().is_empty() {
            return Err(PipelineError::message(Stage::Input, "policy and question must be non-empty"));
        }
        let cfg = &self.config;
        let relevance = check_relevance(self.backends.embedder.as_ref(), &case.policy, &case.question, cfg.threshold)
            .map_err(PipelineError::at(Stage::Relevance))?;
        if !relevance.relevant {
            return Ok(Decision {
                kind: DecisionKind::Irrelevant,
                follow_up: None,
                trace: DecisionTrace::irrelevant(relevance),
            });
        }

        let generator = self.backends.generator.as_ref();
        let (mut questions, raw_decomposition) =
            decompose(generator, case.prompt_case(), &cfg.exemplars, &cfg.decomposition)
                .map_err(PipelineError::at(Stage::Decomposition))?;

        let (mut assignment, mut answers) =
            resolve_answers(generator, self.backends.nli.as_ref(), &questions, &case.history, &case.scenario)
                .map_err(PipelineError::at(Stage::Answering))?;

        let filter = filter_questions(generator, &mut questions, case.prompt_case(), &cfg.decomposition)
            .map_err(PipelineError::at(Stage::Filtering))?;
        for decision in filter.iter().filter(|d| !d.keep) {
            assignment.remove(&decision.id);
            answers.retain(|a| a.id != decision.id);
        }
        if questions.is_empty() {
            return Err(PipelineError::message(Stage::Filtering, "no questions left after filtering"));
        }

        let (formula, samples) = self.formulate(case, &questions, &assignment)?;
        let trace = DecisionTrace {
            relevance,
            decomposition_output: Some(raw_decomposition),
            questions: Some(questions),
            answers,
            filter,
            assignment: Some(assignment.clone()),
            samples: Some(samples),
            selected_formula: None,
            root_value: None,
        };
        Decision::from_evaluation(trace, &formula, &assignment)
    }

    fn formulate(
        &self,
        case: &CaseInput,
        questions: &QuestionSet,
        assignment: &Assignment,
    ) -> Result<(Formula, SampleTrace), PipelineError> {
        let cfg = &self.config;
        let prompt = prompts::logic_prompt(&case.policy, &case.question, questions, &cfg.exemplars);
        let req = GenerationRequest::new(prompt)
            .samples(cfg.sample_size)
            .temperature(cfg.logic_temperature)
            .max_tokens(cfg.logic_max_tokens);
        let completions = self
            .backends
            .generator
            .generate(&req)
            .map_err(PipelineError::at(Stage::Formulation))?;

        let mut set = SampleSet::new(cfg.sample_size);
        for completion in &completions {
            let text = prompts::extract_expression(completion);
            match parse(&text) {
                Err(e) => set.reject(completion.clone(), e.to_string()),
                Ok(formula) => match formula.variables().into_iter().find(|id| questions.get(id).is_none()) {
                    Some(unknown) => set.reject(completion.clone(), format!("undefined question {unknown}")),
                    None => set.push(formula, completion.clone()),
                },
            }
        }

        let mut trace = SampleTrace {
            completions: completions.clone(),
            accepted: set
                .samples
                .iter()
                .map(|s| AcceptedSample {
                    raw: s.raw.clone(),
                    canonical: s.formula.clone(),
                })
                .collect(),
            rejected: set.rejected.clone(),
            classes: Vec::new(),
            chosen_class: None,
            diversity: None,
            fallback: false,
        };

        match select_consistent_with(&set, cfg.equivalence) {
            Ok(selection) => {
                trace.classes = selection
                    .classes
                    .iter()
                    .map(|c| ClassTrace {
                        members: c.indices.clone(),
                        representative: c.representative().clone(),
                    })
                    .collect();
                trace.chosen_class = Some(selection.chosen);
                trace.diversity = Some(selection.diversity());
                Ok((selection.formula, trace))
            }
            Err(ConsistencyError::NoSamples { .. }) => {
                let unanswered: Vec<VarId> = questions
                    .ids()
                    .into_iter()
                    .filter(|id| assignment.value(id) == Some(TruthValue::Maybe))
                    .collect();
                let ids = if unanswered.is_empty() { questions.ids() } else { unanswered };
                let formula = Formula::conjunction(ids)
                    .ok_or_else(|| PipelineError::message(Stage::Selection, "no questions to fall back on"))?;
                tracing::warn!(fallback = %formula, "no usable logic samples");
                trace.fallback = true;
                Ok((formula, trace))
            }
            Err(e) => Err(PipelineError::at(Stage::Selection)(e)),
        }
    }

    /// Re-evaluates a previous decision's formula after the pending
    /// follow-up was answered, without new backend calls.
    fn reevaluate(&self, previous: &Decision, turn: &ChatTurn) -> Result<Option<Decision>, PipelineError> {
        let (Some(formula), Some(assignment), Some(pending)) = (
            previous.trace.selected_formula.as_ref(),
            previous.trace.assignment.as_ref(),
            previous.follow_up.as_ref(),
        ) else {
            return Ok(None);
        };
        let mut assignment = assignment.clone();
        assignment.insert(pending.id.clone(), pending.text.clone(), turn.answer.truth());
        let mut trace = previous.trace.clone();
        trace.answers.retain(|a| a.id != pending.id);
        trace.answers.push(AnswerDetail {
            id: pending.id.clone(),
            value: turn.answer.truth(),
            source: crate::qa::AnswerSource::History { answer: turn.answer },
        });
        trace.assignment = Some(assignment.clone());
        Decision::from_evaluation(trace, formula, &assignment).map(Some)
    }
}
