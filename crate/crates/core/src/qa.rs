//! Truth values for decomposed questions.
//!
//! Questions already answered in the chat history take the user's answer.
//! Every other question is rewritten as a statement and checked against
//! the user scenario by the entailment backend.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::backends::{BackendError, EntailmentClassifier, GenerationRequest, Generator, NliVerdict};
use crate::decomposition::{Origin, QuestionSet};
use crate::logic::{Assignment, TruthValue, VarId};
use crate::prompts;

#[derive(Debug, thiserror::Error)]
pub enum QaError {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("statement rewrite of {0:?} came back empty")]
    EmptyStatement(String),
    #[error("history has no turn for {0}")]
    MissingHistory(VarId),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn truth(self) -> TruthValue {
        match self {
            YesNo::Yes => TruthValue::True,
            YesNo::No => TruthValue::False,
        }
    }
}

impl fmt::Display for YesNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            YesNo::Yes => "Yes",
            YesNo::No => "No",
        })
    }
}

impl FromStr for YesNo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(YesNo::Yes),
            "no" => Ok(YesNo::No),
            other => Err(format!("expected yes or no, got {other:?}")),
        }
    }
}

impl Serialize for YesNo {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(match self {
            YesNo::Yes => "yes",
            YesNo::No => "no",
        })
    }
}

impl<'de> Deserialize<'de> for YesNo {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// One answered follow-up. Its question ID is its position in the history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub question: String,
    pub answer: YesNo,
}

impl ChatTurn {
    pub fn new(question: impl Into<String>, answer: YesNo) -> Self {
        ChatTurn {
            question: question.into(),
            answer,
        }
    }
}

pub fn verdict_truth(verdict: NliVerdict) -> TruthValue {
    match verdict {
        NliVerdict::Entailment => TruthValue::True,
        NliVerdict::Contradiction => TruthValue::False,
        NliVerdict::Neutral => TruthValue::Maybe,
    }
}

pub fn question_to_statement(generator: &dyn Generator, question: &str) -> Result<String, QaError> {
    if question.trim().is_empty() {
        return Err(QaError::EmptyQuestion);
    }
    let req = GenerationRequest::new(prompts::statement_prompt(question)).max_tokens(128);
    let raw = generator.generate(&req)?.into_iter().next().unwrap_or_default();
    let statement = prompts::extract_statement(&raw);
    if statement.is_empty() {
        return Err(QaError::EmptyStatement(question.to_owned()));
    }
    Ok(statement)
}

/// Where a question's truth value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AnswerSource {
    History { answer: YesNo },
    Scenario { statement: String, verdict: NliVerdict },
    EmptyScenario,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerDetail {
    pub id: VarId,
    pub value: TruthValue,
    #[serde(flatten)]
    pub source: AnswerSource,
}

pub fn answer_from_scenario(
    generator: &dyn Generator,
    nli: &dyn EntailmentClassifier,
    scenario: &str,
    question: &str,
) -> Result<(TruthValue, AnswerSource), QaError> {
    if question.trim().is_empty() {
        return Err(QaError::EmptyQuestion);
    }
    if scenario.trim().is_empty() {
        return Ok((TruthValue::Maybe, AnswerSource::EmptyScenario));
    }
    let statement = question_to_statement(generator, question)?;
    let verdict = nli.classify(scenario, &statement)?;
    Ok((verdict_truth(verdict), AnswerSource::Scenario { statement, verdict }))
}

/// Assigns every question a value: history answers for history questions,
/// scenario entailment for the rest.
pub fn resolve_answers(
    generator: &dyn Generator,
    nli: &dyn EntailmentClassifier,
    questions: &QuestionSet,
    history: &[ChatTurn],
    scenario: &str,
) -> Result<(Assignment, Vec<AnswerDetail>), QaError> {
    let mut assignment = Assignment::new();
    let mut details = Vec::with_capacity(questions.len());
    for q in questions.iter() {
        let (value, source) = match q.origin {
            Origin::History => {
                let turn = q
                    .id
                    .question_index()
                    .and_then(|i| history.get(i))
                    .ok_or_else(|| QaError::MissingHistory(q.id.clone()))?;
                (turn.answer.truth(), AnswerSource::History { answer: turn.answer })
            }
            Origin::Generated => answer_from_scenario(generator, nli, scenario, &q.text)?,
        };
        assignment.insert(q.id.clone(), q.text.clone(), value);
        details.push(AnswerDetail {
            id: q.id.clone(),
            value,
            source,
        });
    }
    Ok((assignment, details))
}
