use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sharc::{read_records, DatasetError};
use crate::decomposition::{Exemplar, ExemplarPool, QuestionSet};
use crate::logic::{parse, Formula, VarId};

/// Question lists appear either as `{"Q0": "...", ...}` or as a plain array
/// numbered from `Q0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum QuestionList {
    Map(BTreeMap<VarId, String>),
    List(Vec<String>),
}

impl From<QuestionList> for BTreeMap<VarId, String> {
    fn from(list: QuestionList) -> Self {
        match list {
            QuestionList::Map(m) => m,
            QuestionList::List(v) => v.into_iter().enumerate().map(|(i, q)| (VarId::question(i), q)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qa4pcItem {
    #[serde(alias = "tree_id", alias = "item_id")]
    pub id: String,
    #[serde(alias = "snippet", alias = "rule")]
    pub policy: String,
    #[serde(default, alias = "user_question")]
    pub question: String,
    #[serde(alias = "decomposed_questions", with = "question_list")]
    pub questions: BTreeMap<VarId, String>,
    #[serde(alias = "expression", alias = "logic", alias = "gold")]
    pub gold_expression: String,
}

mod question_list {
    use super::*;

    pub fn serialize<S: serde::Serializer>(m: &BTreeMap<VarId, String>, s: S) -> Result<S::Ok, S::Error> {
        m.serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<VarId, String>, D::Error> {
        QuestionList::deserialize(d).map(Into::into)
    }
}

impl Qa4pcItem {
    pub fn gold(&self) -> Result<Formula, String> {
        parse(&self.gold_expression).map_err(|e| format!("field `gold_expression`: {e}"))
    }

    fn validate(&self) -> Result<(), String> {
        for id in self.gold()?.variables() {
            if !self.questions.contains_key(&id) {
                return Err(format!("field `gold_expression` references {id}, which has no question"));
            }
        }
        Ok(())
    }

    /// Gold questions as a prompt-ready set, in ID order.
    pub fn question_set(&self) -> QuestionSet {
        let mut qs = QuestionSet::new();
        for text in self.questions.values() {
            qs.push_generated(text.clone());
        }
        qs
    }

    /// Whether the question IDs are exactly `Q0..Qn-1`, as prompts number them.
    pub fn densely_numbered(&self) -> bool {
        self.questions.keys().enumerate().all(|(i, id)| *id == VarId::question(i))
    }

    pub fn to_exemplar(&self) -> Exemplar {
        Exemplar {
            id: self.id.clone(),
            source: "qa4pc".into(),
            policy: self.policy.clone(),
            question: self.question.clone(),
            history: Vec::new(),
            questions: self.questions.values().cloned().collect(),
            expression: self.gold_expression.clone(),
        }
    }
}

pub fn load_qa4pc(path: impl AsRef<Path>) -> Result<Vec<Qa4pcItem>, DatasetError> {
    read_records(path.as_ref())?
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            let item: Qa4pcItem =
                serde_json::from_value(value).map_err(|e| DatasetError::Schema { index, message: e.to_string() })?;
            item.validate().map_err(|message| DatasetError::Schema { index, message })?;
            Ok(item)
        })
        .collect()
}

/// Tree IDs of the in-context pool, in order; `handcrafted` marks entries
/// authored rather than drawn from the dataset.
pub const POOL_TREE_IDS: &str = include_str!("../../assets/exemplars/sharc_tree_ids.txt");

pub fn pool_tree_ids() -> Vec<&'static str> {
    POOL_TREE_IDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Builds the pool from dataset items matched by tree ID. Handcrafted
/// positions, and IDs absent from `items`, keep the builtin exemplar at
/// the same position.
pub fn hydrate_pool(items: &[Qa4pcItem]) -> ExemplarPool {
    let builtin = ExemplarPool::builtin();
    let exemplars = pool_tree_ids()
        .into_iter()
        .zip(builtin.exemplars)
        .map(|(tree_id, fallback)| {
            items
                .iter()
                .find(|item| item.id == tree_id && item.densely_numbered())
                .map_or(fallback, Qa4pcItem::to_exemplar)
        })
        .collect();
    ExemplarPool {
        version: format!("{}+hydrated", builtin.version),
        exemplars,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_both_question_shapes() {
        let a: Qa4pcItem = serde_json::from_str(
            r#"{"id": "a", "snippet": "p", "questions": ["x?", "y?"], "expression": "Q0 and not Q1"}"#,
        )
        .unwrap();
        let b: Qa4pcItem = serde_json::from_str(
            r#"{"tree_id": "a", "policy": "p", "questions": {"Q0": "x?", "Q1": "y?"}, "gold_expression": "Q0 and not Q1"}"#,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_ok() && a.densely_numbered());
    }

    #[test]
    fn gold_must_reference_known_ids() {
        let item: Qa4pcItem =
            serde_json::from_str(r#"{"id": "a", "policy": "p", "questions": ["x?"], "expression": "Q0 or Q3"}"#).unwrap();
        assert!(item.validate().unwrap_err().contains("Q3"));
    }

    #[test]
    fn pool_has_twenty_positions() {
        let ids = pool_tree_ids();
        assert_eq!(ids.len(), 20);
        assert_eq!(ids[3], "handcrafted");
        assert_eq!(ids[6], "handcrafted");
        let item = Qa4pcItem {
            id: ids[0].into(),
            policy: "p".into(),
            question: "q".into(),
            questions: [(VarId::question(0), "x?".to_owned())].into_iter().collect(),
            gold_expression: "Q0".into(),
        };
        let pool = hydrate_pool(&[item]);
        assert_eq!(pool.len(), 20);
        assert_eq!(pool.exemplars[0].source, "qa4pc");
        assert_eq!(pool.exemplars[1], ExemplarPool::builtin().exemplars[1]);
    }
}
