use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::corpus_bleu;
use super::metrics::{classify, micro_macro, Class, ClassCounts, Classified, EmptyResults, MetricReport};
use super::sharc::{GoldAnswer, SharcUtterance};
use crate::pipeline::{Decision, Engine};

/// One evaluated utterance; serialized as a line of the trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub utterance_id: String,
    pub tree_id: String,
    pub gold: GoldAnswer,
    pub classified: Classified,
    #[serde(default)]
    pub decision: Option<Decision>,
    #[serde(default)]
    pub error: Option<String>,
}

impl CaseResult {
    fn diversity_label(&self) -> &'static str {
        let samples = self.decision.as_ref().and_then(|d| d.trace.samples.as_ref());
        match samples {
            Some(s) if s.fallback => "fallback",
            Some(s) => match s.diversity {
                Some(crate::consistency::Diversity::Unanimous) => "unanimous",
                Some(crate::consistency::Diversity::Majority) => "majority",
                Some(crate::consistency::Diversity::Split) => "split",
                None => "none",
            },
            None => "none",
        }
    }
}

/// Runs the engine over the first `limit` utterances (all when `None`),
/// in parallel. Results are sorted by utterance ID.
pub fn run_sharc(engine: &Engine, utterances: &[SharcUtterance], limit: Option<usize>) -> Vec<CaseResult> {
    let slice = &utterances[..limit.map_or(utterances.len(), |n| n.min(utterances.len()))];
    let mut results: Vec<CaseResult> = slice
        .par_iter()
        .map(|u| {
            let outcome = engine.decide(&u.to_case());
            if let Err(e) = &outcome {
                tracing::warn!(utterance = %u.utterance_id, error = %e, "pipeline error");
            }
            let kind = outcome.as_ref().ok().map(|d| d.kind);
            CaseResult {
                utterance_id: u.utterance_id.clone(),
                tree_id: u.tree_id.clone(),
                classified: classify(kind, &u.answer),
                gold: u.answer.clone(),
                error: outcome.as_ref().err().map(ToString::to_string),
                decision: outcome.ok(),
            }
        })
        .collect();
    results.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    results
}

/// Aggregates results into a report. Expects results in a fixed order,
/// as returned by [`run_sharc`].
pub fn report(results: &[CaseResult]) -> Result<MetricReport, EmptyResults> {
    let classified: Vec<Classified> = results.iter().map(|r| r.classified).collect();
    let (micro_accuracy, macro_accuracy) = micro_macro(&classified)?;

    let mut per_class: BTreeMap<Class, ClassCounts> = Class::ALL.iter().map(|&c| (c, ClassCounts::default())).collect();
    for c in &classified {
        per_class.get_mut(&c.gold).expect("all classes present").gold += 1;
        if let Some(p) = c.predicted {
            let counts = per_class.get_mut(&p).expect("all classes present");
            counts.predicted += 1;
            counts.correct += usize::from(c.correct);
        }
    }

    let pairs: Vec<(&str, &str)> = results
        .iter()
        .filter_map(|r| {
            let predicted = r.decision.as_ref()?.follow_up.as_ref()?;
            match &r.gold {
                GoldAnswer::FollowUp(gold) => Some((predicted.text.as_str(), gold.as_str())),
                _ => None,
            }
        })
        .collect();

    let mut diversity = BTreeMap::new();
    for r in results {
        *diversity.entry(r.diversity_label().to_owned()).or_insert(0) += 1;
    }

    Ok(MetricReport {
        total: results.len(),
        correct: classified.iter().filter(|c| c.correct).count(),
        errors: results.iter().filter(|r| r.error.is_some()).count(),
        micro_accuracy,
        macro_accuracy,
        bleu1: corpus_bleu(pairs.iter().copied(), 1),
        bleu4: corpus_bleu(pairs.iter().copied(), 4),
        bleu_pairs: pairs.len(),
        per_class,
        diversity,
    })
}
