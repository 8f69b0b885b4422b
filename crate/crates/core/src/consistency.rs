//! Self-consistency over sampled logical forms.
//!
//! Samples are partitioned into classes of three-valued equivalent
//! formulas. The largest class wins (earliest-appearing class on ties)
//! and its shortest member (earliest sample on ties) is returned.

use serde::{Deserialize, Serialize};

use crate::logic::{parse, symbol_count, Equivalence, Formula, LogicError};

#[derive(Debug, thiserror::Error)]
pub enum ConsistencyError {
    #[error("no parseable samples among {attempted} attempted")]
    NoSamples { attempted: usize },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub formula: Formula,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedSample {
    pub raw: String,
    pub reason: String,
}

/// The usable samples drawn for one case, plus the ones that were rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub rejected: Vec<RejectedSample>,
    pub sample_size: usize,
}

impl SampleSet {
    pub fn new(sample_size: usize) -> Self {
        SampleSet {
            samples: Vec::new(),
            rejected: Vec::new(),
            sample_size,
        }
    }

    /// Builds a set from already-parsed formulas.
    pub fn from_formulas(formulas: Vec<Formula>) -> Self {
        let sample_size = formulas.len();
        SampleSet {
            samples: formulas
                .into_iter()
                .map(|formula| Sample {
                    raw: formula.to_string(),
                    formula,
                })
                .collect(),
            rejected: Vec::new(),
            sample_size,
        }
    }

    /// Parses `raw`; unparseable text is recorded as rejected.
    pub fn push_raw(&mut self, raw: impl Into<String>) -> bool {
        let raw = raw.into();
        match parse(&raw) {
            Ok(formula) => {
                self.samples.push(Sample { formula, raw });
                true
            }
            Err(e) => {
                self.reject(raw, e.to_string());
                false
            }
        }
    }

    pub fn push(&mut self, formula: Formula, raw: impl Into<String>) {
        self.samples.push(Sample {
            formula,
            raw: raw.into(),
        });
    }

    pub fn reject(&mut self, raw: impl Into<String>, reason: impl Into<String>) {
        self.rejected.push(RejectedSample {
            raw: raw.into(),
            reason: reason.into(),
        });
    }

    pub fn formulas(&self) -> Vec<Formula> {
        self.samples.iter().map(|s| s.formula.clone()).collect()
    }
}

/// Pairwise-equivalent samples. `indices` are positions in the sample list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub members: Vec<Formula>,
    pub indices: Vec<usize>,
    representative: usize,
}

impl EquivalenceClass {
    fn new(formula: Formula, index: usize) -> Self {
        EquivalenceClass {
            members: vec![formula],
            indices: vec![index],
            representative: 0,
        }
    }

    fn add(&mut self, formula: Formula, index: usize) {
        if symbol_count(&formula) < symbol_count(&self.members[self.representative]) {
            self.representative = self.members.len();
        }
        self.members.push(formula);
        self.indices.push(index);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member with the fewest symbols; the earliest one on ties.
    pub fn representative(&self) -> &Formula {
        &self.members[self.representative]
    }
}

pub fn partition(samples: &[Formula]) -> Result<Vec<EquivalenceClass>, LogicError> {
    partition_with(samples, Equivalence::default())
}

/// Groups formulas into equivalence classes ordered by first appearance.
pub fn partition_with(
    samples: &[Formula],
    equivalence: Equivalence,
) -> Result<Vec<EquivalenceClass>, LogicError> {
    let mut classes: Vec<EquivalenceClass> = Vec::new();
    'samples: for (index, formula) in samples.iter().enumerate() {
        for class in classes.iter_mut() {
            if equivalence.check(&class.members[0], formula)? {
                class.add(formula.clone(), index);
                continue 'samples;
            }
        }
        classes.push(EquivalenceClass::new(formula.clone(), index));
    }
    Ok(classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diversity {
    /// Every sample landed in one class.
    Unanimous,
    Majority,
    /// Every sample is in its own class.
    Split,
}

impl Diversity {
    pub fn of(classes: &[EquivalenceClass]) -> Diversity {
        let total: usize = classes.iter().map(EquivalenceClass::len).sum();
        if classes.len() <= 1 {
            Diversity::Unanimous
        } else if classes.len() == total {
            Diversity::Split
        } else {
            Diversity::Majority
        }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub formula: Formula,
    pub classes: Vec<EquivalenceClass>,
    /// Index into `classes` of the winning class.
    pub chosen: usize,
}

impl Selection {
    pub fn diversity(&self) -> Diversity {
        Diversity::of(&self.classes)
    }
}

pub fn select_consistent(set: &SampleSet) -> Result<Selection, ConsistencyError> {
    select_consistent_with(set, Equivalence::default())
}

pub fn select_consistent_with(
    set: &SampleSet,
    equivalence: Equivalence,
) -> Result<Selection, ConsistencyError> {
    if set.samples.is_empty() {
        return Err(ConsistencyError::NoSamples {
            attempted: set.rejected.len(),
        });
    }
    let classes = partition_with(&set.formulas(), equivalence)?;
    let mut chosen = 0;
    for (i, class) in classes.iter().enumerate() {
        if class.len() > classes[chosen].len() {
            chosen = i;
        }
    }
    Ok(Selection {
        formula: classes[chosen].representative().clone(),
        classes,
        chosen,
    })
}

pub fn diversity_label(set: &SampleSet) -> Result<Diversity, LogicError> {
    Ok(Diversity::of(&partition(&set.formulas())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn set(exprs: &[&str]) -> SampleSet {
        SampleSet::from_formulas(exprs.iter().map(|e| p(e)).collect())
    }

    #[test]
    fn de_morgan_pair_forms_one_class() {
        let classes = partition(&set(&["not (A and B)", "not A or not B", "A and B"]).formulas())
            .unwrap();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].indices, vec![0, 1]);
        assert_eq!(classes[1].indices, vec![2]);
    }

    #[test]
    fn identical_and_distinct_samples() {
        let classes = partition(&set(&["A", "A", "A"]).formulas()).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].len(), 3);

        let classes = partition(&set(&["A", "B", "A and B"]).formulas()).unwrap();
        assert_eq!(classes.iter().map(EquivalenceClass::len).collect::<Vec<_>>(), [1, 1, 1]);
    }

    #[test]
    fn selects_shortest_of_largest_class() {
        let s = set(&["not A or not B", "not (A and B)", "A and B"]);
        let sel = select_consistent(&s).unwrap();
        assert_eq!(sel.formula, p("not (A and B)"));
        assert_eq!(sel.chosen, 0);
        assert_eq!(sel.diversity(), Diversity::Majority);
    }

    #[test]
    fn ties_resolve_by_sample_order() {
        let sel = select_consistent(&set(&["A or B", "B or A", "A and B", "B and A"])).unwrap();
        assert_eq!(sel.formula, p("A or B"));
        assert_eq!(select_consistent(&set(&["A"])).unwrap().formula, p("A"));
    }

    #[test]
    fn empty_set_is_an_error() {
        let mut s = SampleSet::new(3);
        assert!(!s.push_raw("Q0 and and Q1"));
        assert!(matches!(
            select_consistent(&s),
            Err(ConsistencyError::NoSamples { attempted: 1 })
        ));
    }

    #[test]
    fn diversity_labels() {
        let d = |e: &[&str]| diversity_label(&set(e)).unwrap();
        assert_eq!(d(&["not (A and B)", "not A or not B", "not (A and B)"]), Diversity::Unanimous);
        assert_eq!(d(&["not (A and B)", "not A or not B", "A and B"]), Diversity::Majority);
        assert_eq!(d(&["A", "B", "A and B"]), Diversity::Split);
        assert_eq!(d(&["A"]), Diversity::Unanimous);
    }
}
