use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sharc::GoldAnswer;
use crate::pipeline::DecisionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Yes,
    No,
    Irrelevant,
    FollowUp,
}

impl Class {
    pub const ALL: [Class; 4] = [Class::Yes, Class::No, Class::Irrelevant, Class::FollowUp];

    pub fn of_decision(kind: DecisionKind) -> Self {
        match kind {
            DecisionKind::Yes => Class::Yes,
            DecisionKind::No => Class::No,
            DecisionKind::Irrelevant => Class::Irrelevant,
            DecisionKind::FollowUp => Class::FollowUp,
        }
    }

    pub fn of_gold(gold: &GoldAnswer) -> Self {
        match gold {
            GoldAnswer::Yes => Class::Yes,
            GoldAnswer::No => Class::No,
            GoldAnswer::Irrelevant => Class::Irrelevant,
            GoldAnswer::FollowUp(_) => Class::FollowUp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Yes => "yes",
            Class::No => "no",
            Class::Irrelevant => "irrelevant",
            Class::FollowUp => "follow_up",
        }
    }
}

/// A prediction scored at class level. `predicted` is `None` when the
/// pipeline failed on the case, which counts as incorrect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classified {
    pub predicted: Option<Class>,
    pub gold: Class,
    pub correct: bool,
}

pub fn classify(predicted: Option<DecisionKind>, gold: &GoldAnswer) -> Classified {
    let predicted = predicted.map(Class::of_decision);
    let gold = Class::of_gold(gold);
    Classified {
        predicted,
        gold,
        correct: predicted == Some(gold),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no results to score")]
pub struct EmptyResults;

/// Micro accuracy over all results, and the unweighted mean of per-class
/// accuracies over the gold classes that occur.
pub fn micro_macro(results: &[Classified]) -> Result<(f64, f64), EmptyResults> {
    if results.is_empty() {
        return Err(EmptyResults);
    }
    let correct = results.iter().filter(|r| r.correct).count();
    let micro = correct as f64 / results.len() as f64;
    let per_class: Vec<f64> = Class::ALL
        .iter()
        .filter_map(|&class| {
            let gold: Vec<_> = results.iter().filter(|r| r.gold == class).collect();
            (!gold.is_empty()).then(|| gold.iter().filter(|r| r.correct).count() as f64 / gold.len() as f64)
        })
        .collect();
    let macro_ = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok((micro, macro_))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub total: usize,
    pub correct: usize,
    pub errors: usize,
    pub micro_accuracy: f64,
    pub macro_accuracy: f64,
    /// Corpus BLEU over cases where both prediction and gold are follow-ups.
    pub bleu1: Option<f64>,
    pub bleu4: Option<f64>,
    pub bleu_pairs: usize,
    pub per_class: BTreeMap<Class, ClassCounts>,
    /// Self-consistency outcome per case: `unanimous`, `majority`, `split`,
    /// `fallback`, or `none` when no formula was sampled.
    pub diversity: BTreeMap<String, usize>,
}

impl MetricReport {
    pub fn table(&self) -> String {
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_owned(), pct);
        let mut out = String::new();
        let _ = writeln!(out, "cases      {:>6}  errors {}", self.total, self.errors);
        let _ = writeln!(out, "micro      {:>6}", pct(self.micro_accuracy));
        let _ = writeln!(out, "macro      {:>6}", pct(self.macro_accuracy));
        let _ = writeln!(out, "bleu-1     {:>6}  ({} pairs)", opt(self.bleu1), self.bleu_pairs);
        let _ = writeln!(out, "bleu-4     {:>6}", opt(self.bleu4));
        let _ = writeln!(out, "{:<11}{:>6}{:>10}{:>9}", "class", "gold", "predicted", "correct");
        for (class, c) in &self.per_class {
            let _ = writeln!(out, "{:<11}{:>6}{:>10}{:>9}", class.as_str(), c.gold, c.predicted, c.correct);
        }
        let _ = writeln!(out, "diversity");
        for (label, n) in &self.diversity {
            let _ = writeln!(out, "  {label:<9}{n:>6}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(gold: Class, predicted: Class) -> Classified {
        Classified {
            predicted: Some(predicted),
            gold,
            correct: gold == predicted,
        }
    }

    #[test]
    fn class_level_matching() {
        let c = classify(Some(DecisionKind::FollowUp), &GoldAnswer::FollowUp("Anything?".into()));
        assert!(c.correct);
        assert!(!classify(Some(DecisionKind::Yes), &GoldAnswer::No).correct);
        assert!(classify(Some(DecisionKind::Irrelevant), &GoldAnswer::Irrelevant).correct);
        assert!(!classify(None, &GoldAnswer::Yes).correct);
    }

    #[test]
    fn hand_counted_confusion() {
        use Class::*;
        // yes 4/4, no 1/2, irrelevant 0/1, follow-up 1/2.
        let results = [
            result(Yes, Yes),
            result(Yes, Yes),
            result(Yes, Yes),
            result(Yes, Yes),
            result(No, No),
            result(No, Yes),
            result(Irrelevant, FollowUp),
            result(FollowUp, FollowUp),
            result(FollowUp, No),
        ];
        let (micro, macro_) = micro_macro(&results).unwrap();
        assert_eq!(micro, 6.0 / 9.0);
        assert_eq!(macro_, (1.0 + 0.5 + 0.0 + 0.5) / 4.0);
    }

    #[test]
    fn absent_classes_leave_the_macro_mean() {
        let results = [result(Class::No, Class::No), result(Class::No, Class::Yes)];
        assert_eq!(micro_macro(&results).unwrap(), (0.5, 0.5));
        assert_eq!(micro_macro(&[]), Err(EmptyResults));
    }
}
