//! Policy compliance decisions by logical decomposition.
//!
//! A policy is decomposed into yes/no questions by a language model, the
//! questions are composed into a propositional formula (self-consistency
//! over several sampled formulations), and the formula is evaluated in
//! Kleene's strong three-valued logic with truth values taken from the
//! chat history and an entailment model run over the user's scenario.
//! The result is Yes, No, Irrelevant, or the next follow-up question.

pub mod backends;
pub mod consistency;
pub mod decomposition;
pub mod evaluation;
pub mod logic;
pub mod pipeline;
pub mod prompts;
pub mod qa;
pub mod relevance;
pub mod scripted;

pub use backends::{Backends, NliVerdict};
pub use consistency::{select_consistent, Diversity, SampleSet};
pub use logic::{equivalent, evaluate, parse, symbol_count, Assignment, Formula, TruthValue, VarId};
pub use pipeline::{CaseInput, Decision, DecisionKind, DecisionTrace, Engine, PipelineConfig, Session, SessionStatus};
pub use qa::{ChatTurn, YesNo};
