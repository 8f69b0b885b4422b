//! Policy decomposition into yes/no questions.
//!
//! History turns become `Q0..Qk-1`; the model continues numbering from
//! `Qk`. When the merged set reaches [`FILTER_MIN_QUESTIONS`], each
//! generated question is put to the model once more and dropped if the
//! model says it is not pertinent.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, GenerationRequest, Generator};
use crate::logic::{parse, Formula, VarId};
use crate::prompts::{self, PromptCase};
use crate::qa::ChatTurn;

pub const FILTER_MIN_QUESTIONS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum DecompositionError {
    #[error("model output contained no questions")]
    Empty,
    #[error("exemplar {id}: {message}")]
    InvalidExemplar { id: String, message: String },
    #[error("exemplar pool: {0}")]
    Pool(String),
    #[error("cannot sample {requested} exemplars from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A worked in-context example: policy, question, its decomposition and the
/// gold expression. History questions are the leading entries of `questions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    #[serde(default)]
    pub source: String,
    pub policy: String,
    pub question: String,
    #[serde(default)]
    pub history: Vec<ChatTurn>,
    pub questions: Vec<String>,
    pub expression: String,
}

impl Exemplar {
    pub fn formula(&self) -> Result<Formula, DecompositionError> {
        parse(&self.expression).map_err(|e| self.invalid(e.to_string()))
    }

    fn invalid(&self, message: impl Into<String>) -> DecompositionError {
        DecompositionError::InvalidExemplar {
            id: self.id.clone(),
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), DecompositionError> {
        if self.history.len() > self.questions.len() {
            return Err(self.invalid("more history turns than questions"));
        }
        for (i, turn) in self.history.iter().enumerate() {
            if turn.question.trim() != self.questions[i].trim() {
                return Err(self.invalid(format!("history turn {i} is not question Q{i}")));
            }
        }
        for id in self.formula()?.variables() {
            match id.question_index() {
                Some(i) if i < self.questions.len() => {}
                _ => return Err(self.invalid(format!("expression references undefined {id}"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarPool {
    pub version: String,
    pub exemplars: Vec<Exemplar>,
}

const BUILTIN_POOL: &str = include_str!("../assets/exemplars/v1.json");

impl ExemplarPool {
    /// The versioned pool shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_POOL).expect("builtin exemplar pool is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, DecompositionError> {
        let pool: ExemplarPool =
            serde_json::from_str(text).map_err(|e| DecompositionError::Pool(e.to_string()))?;
        for ex in &pool.exemplars {
            ex.validate()?;
        }
        Ok(pool)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecompositionError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DecompositionError::Pool(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    /// First `k` exemplars in pool order (all of them when `k` exceeds the pool).
    pub fn first(&self, k: usize) -> &[Exemplar] {
        &self.exemplars[..k.min(self.exemplars.len())]
    }

    /// `k` distinct exemplars drawn uniformly at random, in draw order.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<Exemplar>, DecompositionError> {
        if k > self.exemplars.len() {
            return Err(DecompositionError::PoolTooSmall {
                requested: k,
                available: self.exemplars.len(),
            });
        }
        Ok(self.exemplars.choose_multiple(rng, k).cloned().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    History,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: VarId,
    pub text: String,
    pub origin: Origin,
}

/// Questions in ID order; history questions come first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionSet {
    entries: Vec<Question>,
}

impl QuestionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_history(history: &[ChatTurn]) -> Self {
        QuestionSet {
            entries: history
                .iter()
                .enumerate()
                .map(|(i, turn)| Question {
                    id: VarId::question(i),
                    text: turn.question.trim().to_owned(),
                    origin: Origin::History,
                })
                .collect(),
        }
    }

    fn next_index(&self) -> usize {
        self.entries
            .iter()
            .filter_map(|q| q.id.question_index())
            .max()
            .map_or(0, |i| i + 1)
    }

    pub fn push_generated(&mut self, text: impl Into<String>) -> VarId {
        let id = VarId::question(self.next_index());
        self.entries.push(Question {
            id: id.clone(),
            text: text.into(),
            origin: Origin::Generated,
        });
        id
    }

    /// Appends the questions of `generated` in order, renumbering after ours.
    pub fn extend_generated(&mut self, generated: &QuestionSet) {
        for q in &generated.entries {
            self.push_generated(q.text.clone());
        }
    }

    pub fn remove(&mut self, id: &VarId) -> Option<Question> {
        let pos = self.entries.iter().position(|q| &q.id == id)?;
        Some(self.entries.remove(pos))
    }

    pub fn get(&self, id: &VarId) -> Option<&Question> {
        self.entries.iter().find(|q| &q.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Question> {
        self.entries.iter()
    }

    pub fn ids(&self) -> Vec<VarId> {
        self.entries.iter().map(|q| q.id.clone()).collect()
    }

    pub fn generated(&self) -> impl Iterator<Item = &Question> {
        self.entries.iter().filter(|q| q.origin == Origin::Generated)
    }

    pub fn history_count(&self) -> usize {
        self.entries.iter().filter(|q| q.origin == Origin::History).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Qi: text` lines, the form models are asked to produce.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|q| format!("{}: {}\n", q.id, q.text))
            .collect()
    }
}

/// Recognizes `Q<i>: text` (also `Q<i>.` / `Q<i>)` and list bullets).
fn question_line(line: &str) -> Option<(usize, &str)> {
    let line = line.trim();
    let line = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .unwrap_or(line)
        .trim_start();
    let rest = line.strip_prefix('Q')?;
    let digits_end = rest.find(|c: char| !c.is_ascii_digit())?;
    if digits_end == 0 {
        return None;
    }
    let index = rest[..digits_end].parse().ok()?;
    let text = rest[digits_end..].strip_prefix([':', '.', ')'])?.trim();
    (!text.is_empty()).then_some((index, text))
}

/// Extracts generated questions from a decomposition completion.
///
/// Only lines numbered at or above `history_count` are kept; they are
/// renumbered densely from `Q{history_count}` in order of appearance.
/// Parsing stops at the first `###` block after a question was seen.
pub fn parse_decomposition(output: &str, history_count: usize) -> Result<QuestionSet, DecompositionError> {
    let mut texts = Vec::new();
    for line in output.lines() {
        if line.trim_start().starts_with("###") && !texts.is_empty() {
            break;
        }
        if let Some((index, text)) = question_line(line) {
            if index >= history_count {
                texts.push(text.to_owned());
            }
        }
    }
    if texts.is_empty() {
        return Err(DecompositionError::Empty);
    }
    Ok(QuestionSet {
        entries: texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Question {
                id: VarId::question(history_count + i),
                text,
                origin: Origin::Generated,
            })
            .collect(),
    })
}

/// Sampling parameters for the decomposition and filter calls.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionSettings {
    pub temperature: f64,
    pub max_tokens: usize,
    pub filter_max_tokens: usize,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        DecompositionSettings {
            temperature: 0.0,
            max_tokens: 512,
            filter_max_tokens: 8,
        }
    }
}

/// Prompts the model and merges its questions after the history questions.
pub fn decompose(
    generator: &dyn Generator,
    case: PromptCase<'_>,
    exemplars: &[Exemplar],
    settings: &DecompositionSettings,
) -> Result<(QuestionSet, String), DecompositionError> {
    let prompt = prompts::decomposition_prompt(case, exemplars);
    let req = GenerationRequest::new(prompt)
        .temperature(settings.temperature)
        .max_tokens(settings.max_tokens);
    let raw = generator.generate(&req)?.into_iter().next().unwrap_or_default();
    let mut questions = QuestionSet::from_history(case.history);
    match parse_decomposition(&raw, case.history.len()) {
        Ok(generated) => questions.extend_generated(&generated),
        // History alone may still decide the case.
        Err(DecompositionError::Empty) if !case.history.is_empty() => {
            tracing::warn!("decomposition produced no new questions");
        }
        Err(e) => return Err(e),
    }
    Ok((questions, raw))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub id: VarId,
    pub reply: String,
    pub keep: bool,
}

/// `Some(false)` only for a clear No; anything unparseable keeps the question.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Drops generated questions the model judges non-pertinent, but only when
/// the set holds at least [`FILTER_MIN_QUESTIONS`] questions. Surviving IDs
/// are not renumbered.
pub fn filter_questions(
    generator: &dyn Generator,
    questions: &mut QuestionSet,
    case: PromptCase<'_>,
    settings: &DecompositionSettings,
) -> Result<Vec<FilterDecision>, DecompositionError> {
    if questions.len() < FILTER_MIN_QUESTIONS {
        return Ok(Vec::new());
    }
    let candidates: Vec<Question> = questions.generated().cloned().collect();
    let mut decisions = Vec::with_capacity(candidates.len());
    for q in candidates {
        let req = GenerationRequest::new(prompts::filter_prompt(case, &q.text))
            .max_tokens(settings.filter_max_tokens);
        let reply = generator.generate(&req)?.into_iter().next().unwrap_or_default();
        let keep = parse_yes_no(&reply).unwrap_or(true);
        if !keep {
            questions.remove(&q.id);
        }
        decisions.push(FilterDecision {
            id: q.id,
            reply,
            keep,
        });
    }
    Ok(decisions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::YesNo;

    #[test]
    fn builtin_pool_is_valid() {
        let pool = ExemplarPool::builtin();
        assert_eq!(pool.len(), 20);
        assert_eq!(pool.version, "v1");
    }

    #[test]
    fn parses_generated_questions() {
        let out = "Q1: Do you need to repair or replace your primary residence?\n\
                   Q2: Do you need to repair or replace personal property?";
        let qs = parse_decomposition(out, 1).unwrap();
        assert_eq!(qs.len(), 2);
        let q1 = qs.get(&VarId::question(1)).unwrap();
        assert_eq!(q1.text, "Do you need to repair or replace your primary residence?");
        assert_eq!(q1.origin, Origin::Generated);
    }

    #[test]
    fn ignores_preamble_and_trailing_blocks() {
        let out = "Sure! Here are the questions:\nQ1: First?\n\n### Example 3\nQ0: Not this?\nQ1: Nor this?";
        let qs = parse_decomposition(out, 1).unwrap();
        assert_eq!(qs.render(), "Q1: First?\n");
    }

    #[test]
    fn closes_numbering_gaps() {
        let qs = parse_decomposition("Q3: x", 1).unwrap();
        assert_eq!(qs.ids(), vec![VarId::question(1)]);
        let qs = parse_decomposition("Q0: echoed history\nQ4: a\nQ2: b", 1).unwrap();
        assert_eq!(qs.render(), "Q1: a\nQ2: b\n");
    }

    #[test]
    fn empty_output_is_an_error() {
        assert!(matches!(parse_decomposition("no questions here", 0), Err(DecompositionError::Empty)));
        assert!(matches!(parse_decomposition("Q0: only history", 1), Err(DecompositionError::Empty)));
    }

    #[test]
    fn history_precedes_generated() {
        let history = [ChatTurn::new("Are you a farmer?", YesNo::Yes)];
        let mut qs = QuestionSet::from_history(&history);
        qs.extend_generated(&parse_decomposition("Q1: a?\nQ2: b?", 1).unwrap());
        assert_eq!(qs.history_count(), 1);
        assert_eq!(qs.ids(), (0..3).map(VarId::question).collect::<Vec<_>>());
        assert_eq!(qs.get(&VarId::question(0)).unwrap().origin, Origin::History);
    }

    #[test]
    fn yes_no_replies() {
        assert_eq!(parse_yes_no("Yes."), Some(true));
        assert_eq!(parse_yes_no(" no, because"), Some(false));
        assert_eq!(parse_yes_no("Nope"), None);
        assert_eq!(parse_yes_no(""), None);
    }

    #[test]
    fn sampling_is_seeded() {
        use rand::SeedableRng;
        let pool = ExemplarPool::builtin();
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = pool.sample(5, &mut a).unwrap();
        assert_eq!(x, pool.sample(5, &mut b).unwrap());
        let mut ids: Vec<_> = x.iter().map(|e| e.id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 5);
        assert!(pool.sample(21, &mut a).is_err());
    }

    #[test]
    fn exemplar_validation() {
        let mut ex = ExemplarPool::builtin().exemplars[0].clone();
        ex.expression = "Q0 and Q7".into();
        assert!(ex.validate().is_err());
        ex.expression = "Q0 and and".into();
        assert!(ex.validate().is_err());
    }
}
