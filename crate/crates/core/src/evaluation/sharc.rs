use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::CaseInput;
use crate::qa::{ChatTurn, YesNo};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a JSON array of records: {message}")]
    NotAnArray { path: String, message: String },
    #[error("record {index}: {message}")]
    Schema { index: usize, message: String },
}

pub(crate) fn read_records(path: &Path) -> Result<Vec<Value>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DatasetError::NotAnArray {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// The reference response for an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoldAnswer {
    Yes,
    No,
    Irrelevant,
    FollowUp(String),
}

impl GoldAnswer {
    pub fn parse(answer: &str) -> Self {
        match answer.trim().to_ascii_lowercase().as_str() {
            "yes" => GoldAnswer::Yes,
            "no" => GoldAnswer::No,
            "irrelevant" => GoldAnswer::Irrelevant,
            _ => GoldAnswer::FollowUp(answer.trim().to_owned()),
        }
    }
}

impl fmt::Display for GoldAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoldAnswer::Yes => f.write_str("Yes"),
            GoldAnswer::No => f.write_str("No"),
            GoldAnswer::Irrelevant => f.write_str("Irrelevant"),
            GoldAnswer::FollowUp(q) => f.write_str(q),
        }
    }
}

impl Serialize for GoldAnswer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GoldAnswer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(GoldAnswer::parse(&String::deserialize(deserializer)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharcTurn {
    pub follow_up_question: String,
    pub follow_up_answer: String,
}

/// One utterance as published, under the dataset's own field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharcUtterance {
    pub utterance_id: String,
    pub tree_id: String,
    pub snippet: String,
    pub question: String,
    #[serde(default)]
    pub scenario: String,
    #[serde(default)]
    pub history: Vec<SharcTurn>,
    pub answer: GoldAnswer,
}

impl SharcUtterance {
    pub fn gold(&self) -> &GoldAnswer {
        &self.answer
    }

    fn validate(&self) -> Result<(), String> {
        for (field, value) in [("utterance_id", &self.utterance_id), ("snippet", &self.snippet), ("question", &self.question)] {
            if value.trim().is_empty() {
                return Err(format!("field `{field}` is empty"));
            }
        }
        for (i, turn) in self.history.iter().enumerate() {
            turn.follow_up_answer
                .parse::<YesNo>()
                .map_err(|e| format!("field `history[{i}].follow_up_answer`: {e}"))?;
        }
        Ok(())
    }

    pub fn to_case(&self) -> CaseInput {
        let history = self
            .history
            .iter()
            .map(|t| {
                let answer = t.follow_up_answer.parse().expect("validated on load");
                ChatTurn::new(t.follow_up_question.clone(), answer)
            })
            .collect();
        CaseInput::new(self.snippet.clone(), self.question.clone())
            .with_scenario(self.scenario.clone())
            .with_history(history)
    }
}

/// Reads a JSON array of utterances. Errors name the record index and field.
pub fn load_sharc(path: impl AsRef<Path>) -> Result<Vec<SharcUtterance>, DatasetError> {
    let records = read_records(path.as_ref())?;
    let utterances = records
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            let u: SharcUtterance = serde_json::from_value(value).map_err(|e| DatasetError::Schema {
                index,
                message: e.to_string(),
            })?;
            u.validate().map_err(|message| DatasetError::Schema { index, message })?;
            Ok(u)
        })
        .collect::<Result<Vec<_>, _>>()?;
    tracing::info!(path = %path.as_ref().display(), count = utterances.len(), "loaded utterances");
    Ok(utterances)
}
