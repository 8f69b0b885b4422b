//! Propositional formulas over question variables, evaluated in Kleene's
//! strong three-valued logic.
//!
//! Truth values are ordered `False < Maybe < True`; conjunction is `min`,
//! disjunction is `max`, and negation swaps `True`/`False` while fixing
//! `Maybe`. A formula whose root evaluates to `Maybe` means at least one
//! still-unknown question decides the outcome.

mod eval;
mod parse;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use eval::{
    equivalent, evaluate, evaluate_with, select_follow_up, select_follow_up_with, symbol_count,
    Equivalence, MissingVariable, DEFAULT_MAX_VARIABLES,
};
pub use parse::{parse, ParseError, ParseErrorKind};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("variable {0} has no assigned value")]
    UnknownVariable(VarId),
    #[error("equivalence check over {count} variables exceeds the cap of {cap}")]
    TooManyVariables { count: usize, cap: usize },
    #[error("follow-up selection requires a Maybe formula, got {0}")]
    NotMaybe(TruthValue),
    #[error("invalid variable identifier {0:?}")]
    InvalidIdentifier(String),
}

/// A value of Kleene's strong three-valued logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthValue {
    False,
    Maybe,
    True,
}

impl TruthValue {
    pub const ALL: [TruthValue; 3] = [TruthValue::False, TruthValue::Maybe, TruthValue::True];

    #[must_use]
    pub fn and(self, other: Self) -> Self {
        self.min(other)
    }

    #[must_use]
    pub fn or(self, other: Self) -> Self {
        self.max(other)
    }

    pub fn is_definite(self) -> bool {
        self != TruthValue::Maybe
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            TruthValue::True => Some(true),
            TruthValue::False => Some(false),
            TruthValue::Maybe => None,
        }
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

impl std::ops::Not for TruthValue {
    type Output = Self;

    fn not(self) -> Self {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            TruthValue::Maybe => TruthValue::Maybe,
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::False => "False",
            TruthValue::Maybe => "Maybe",
            TruthValue::True => "True",
        })
    }
}

/// Identifier of a propositional variable.
///
/// Pipeline variables are question IDs (`Q0`, `Q1`, ...), but any
/// identifier-shaped name is accepted so formulas such as `not (A and B)`
/// can be written by hand. Question IDs sort numerically (`Q2 < Q10`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarId(String);

impl VarId {
    pub fn new(name: impl Into<String>) -> Result<Self, LogicError> {
        let name = name.into();
        if is_identifier(&name) && !parse::is_reserved(&name) {
            Ok(VarId(name))
        } else {
            Err(LogicError::InvalidIdentifier(name))
        }
    }

    pub fn question(index: usize) -> Self {
        VarId(format!("Q{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The numeric index when this is a question ID (`Q` followed by digits).
    pub fn question_index(&self) -> Option<usize> {
        let digits = self.0.strip_prefix('Q')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }

    pub fn is_question_id(&self) -> bool {
        self.question_index().is_some()
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Ord for VarId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.question_index(), other.question_index()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for VarId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VarId {
    type Err = LogicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VarId::new(s)
    }
}

impl Serialize for VarId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for VarId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        VarId::new(s).map_err(serde::de::Error::custom)
    }
}

/// Propositional formula over `not`, `and`, `or`.
///
/// Displays in canonical form: lowercase keywords, single spaces, and
/// parentheses only where precedence (`not` > `and` > `or`, binary
/// operators left-associative) requires them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Var(VarId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Panics if `name` is not a valid identifier; meant for literals.
    pub fn var(name: &str) -> Self {
        Formula::Var(VarId::new(name).expect("valid variable identifier"))
    }

    pub fn negate(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    /// Left-nested conjunction of the given variables; `None` when empty.
    pub fn conjunction<I: IntoIterator<Item = VarId>>(ids: I) -> Option<Self> {
        ids.into_iter()
            .map(Formula::Var)
            .reduce(|acc, next| acc.and(next))
    }

    /// Distinct variables in sorted order.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Formula::Var(id) => out.push(id.clone()),
            Formula::Not(inner) => inner.collect_vars(out),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Var(_) => 1,
            Formula::Not(inner) => 1 + inner.depth(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Replaces each variable by the result of `f`, keeping structure.
    pub fn map_vars(&self, f: &mut impl FnMut(&VarId) -> VarId) -> Formula {
        match self {
            Formula::Var(id) => Formula::Var(f(id)),
            Formula::Not(inner) => inner.map_vars(f).negate(),
            Formula::And(l, r) => l.map_vars(f).and(r.map_vars(f)),
            Formula::Or(l, r) => l.map_vars(f).or(r.map_vars(f)),
        }
    }
}

impl FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedValue {
    pub text: String,
    pub value: TruthValue,
}

/// Truth values (with their question texts) keyed by variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<VarId, AssignedValue>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a text-less assignment, mostly for tests and utilities.
    pub fn from_values<I>(values: I) -> Self
    where
        I: IntoIterator<Item = (VarId, TruthValue)>,
    {
        Assignment(
            values
                .into_iter()
                .map(|(id, value)| {
                    (
                        id,
                        AssignedValue {
                            text: String::new(),
                            value,
                        },
                    )
                })
                .collect(),
        )
    }

    /// Inserts or replaces the entry for `id`.
    pub fn insert(&mut self, id: VarId, text: impl Into<String>, value: TruthValue) {
        self.0.insert(
            id,
            AssignedValue {
                text: text.into(),
                value,
            },
        );
    }

    pub fn remove(&mut self, id: &VarId) -> Option<AssignedValue> {
        self.0.remove(id)
    }

    pub fn value(&self, id: &VarId) -> Option<TruthValue> {
        self.0.get(id).map(|entry| entry.value)
    }

    pub fn text(&self, id: &VarId) -> Option<&str> {
        self.0.get(id).map(|entry| entry.text.as_str())
    }

    pub fn get(&self, id: &VarId) -> Option<&AssignedValue> {
        self.0.get(id)
    }

    pub fn contains(&self, id: &VarId) -> bool {
        self.0.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &AssignedValue)> {
        self.0.iter()
    }
}
