//! In-context sweep for choosing a generation model.
//!
//! For each `k` and run, `k` exemplars are drawn from the pool with a
//! seeded RNG, the model formulates every item, and an item counts as
//! correct when its formula is equivalent to the gold one.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::tokenize;
use super::qa4pc::Qa4pcItem;
use crate::backends::{GenerationRequest, Generator};
use crate::decomposition::{decompose, DecompositionError, DecompositionSettings, Exemplar, ExemplarPool, QuestionSet};
use crate::logic::{parse, Equivalence, Formula, VarId};
use crate::prompts::{self, PromptCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceMode {
    /// The model gets the gold questions and writes the expression.
    GivenQuestions,
    /// The model decomposes the policy and writes the expression.
    EndToEnd,
    /// The gold expression is scored against itself; no model calls.
    GoldSanity,
}

#[derive(Debug, Clone)]
pub struct ModelChoiceConfig {
    pub ks: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub mode: ChoiceMode,
    pub temperature: f64,
    pub max_tokens: usize,
    pub equivalence: Equivalence,
}

impl Default for ModelChoiceConfig {
    fn default() -> Self {
        ModelChoiceConfig {
            ks: vec![0, 1, 3, 5, 9, 15, 20],
            runs: 5,
            seed: 0,
            mode: ChoiceMode::GivenQuestions,
            temperature: 0.0,
            max_tokens: 128,
            equivalence: Equivalence::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub formula: Option<Formula>,
    pub correct: bool,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub k: usize,
    pub run: usize,
    pub exemplar_ids: Vec<String>,
    pub accuracy: f64,
    pub outcomes: Vec<ItemOutcome>,
}

fn run_seed(seed: u64, k: usize, run: usize) -> u64 {
    seed ^ ((k as u64) << 32) ^ run as u64
}

/// Scores one prediction against the gold formula.
pub fn score(predicted: &Formula, gold: &Formula, equivalence: Equivalence) -> bool {
    equivalence.check(predicted, gold).unwrap_or(false)
}

fn overlap(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<String>, Vec<String>) = (tokenize(a), tokenize(b));
    let union: std::collections::BTreeSet<&String> = a.iter().chain(&b).collect();
    if union.is_empty() {
        return 0.0;
    }
    let inter = a.iter().collect::<std::collections::BTreeSet<_>>().intersection(&b.iter().collect()).count();
    inter as f64 / union.len() as f64
}

/// Maps model-generated question IDs to gold IDs: exact text matches first
/// (after tokenization), then greedily by token Jaccard overlap of at least
/// one half. Unmatched questions get IDs outside the gold namespace.
pub fn align_questions(generated: &QuestionSet, gold: &Qa4pcItem) -> HashMap<VarId, VarId> {
    let mut mapping = HashMap::new();
    let mut free: Vec<&VarId> = gold.questions.keys().collect();
    let mut pending = Vec::new();
    for q in generated.iter() {
        let exact = free
            .iter()
            .position(|id| tokenize(&gold.questions[*id]) == tokenize(&q.text));
        match exact {
            Some(pos) => {
                mapping.insert(q.id.clone(), free.remove(pos).clone());
            }
            None => pending.push(q),
        }
    }
    let mut candidates: Vec<(f64, usize, &VarId)> = Vec::new();
    for (qi, q) in pending.iter().enumerate() {
        for id in &free {
            let s = overlap(&gold.questions[*id], &q.text);
            if s >= 0.5 {
                candidates.push((s, qi, id));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
    for (_, qi, id) in candidates {
        let q = pending[qi];
        if mapping.contains_key(&q.id) || mapping.values().any(|v| v == id) {
            continue;
        }
        mapping.insert(q.id.clone(), id.clone());
    }
    for q in &pending {
        mapping
            .entry(q.id.clone())
            .or_insert_with(|| VarId::new(format!("unmatched_{}", q.id)).expect("valid identifier"));
    }
    mapping
}

fn formulate_given(
    generator: &dyn Generator,
    item: &Qa4pcItem,
    exemplars: &[Exemplar],
    cfg: &ModelChoiceConfig,
) -> Result<(String, Formula), String> {
    let qs = item.question_set();
    let prompt = prompts::logic_prompt(&item.policy, &item.question, &qs, exemplars);
    let output = complete(generator, prompt, cfg)?;
    let formula = parse(&prompts::extract_expression(&output)).map_err(|e| format!("{e} in {output:?}"))?;
    // Prompt IDs follow the gold map's order; rename back to the gold IDs.
    let to_gold: HashMap<VarId, VarId> = qs.ids().into_iter().zip(item.questions.keys().cloned()).collect();
    Ok((output, formula.map_vars(&mut |id| to_gold.get(id).cloned().unwrap_or_else(|| id.clone()))))
}

fn formulate_end_to_end(
    generator: &dyn Generator,
    item: &Qa4pcItem,
    exemplars: &[Exemplar],
    cfg: &ModelChoiceConfig,
) -> Result<(String, Formula), String> {
    let case = PromptCase {
        policy: &item.policy,
        question: &item.question,
        history: &[],
    };
    let settings = DecompositionSettings {
        temperature: cfg.temperature,
        ..DecompositionSettings::default()
    };
    let (qs, _) = decompose(generator, case, exemplars, &settings).map_err(|e: DecompositionError| e.to_string())?;
    let prompt = prompts::logic_prompt(&item.policy, &item.question, &qs, exemplars);
    let output = complete(generator, prompt, cfg)?;
    let formula = parse(&prompts::extract_expression(&output)).map_err(|e| format!("{e} in {output:?}"))?;
    let mapping = align_questions(&qs, item);
    Ok((output, formula.map_vars(&mut |id| mapping.get(id).cloned().unwrap_or_else(|| id.clone()))))
}

fn complete(generator: &dyn Generator, prompt: String, cfg: &ModelChoiceConfig) -> Result<String, String> {
    let req = GenerationRequest::new(prompt).temperature(cfg.temperature).max_tokens(cfg.max_tokens);
    generator
        .generate(&req)
        .map_err(|e| e.to_string())?
        .into_iter()
        .next()
        .ok_or_else(|| "empty completion list".to_owned())
}

fn evaluate_item(
    generator: &dyn Generator,
    item: &Qa4pcItem,
    exemplars: &[Exemplar],
    cfg: &ModelChoiceConfig,
) -> ItemOutcome {
    let gold = match item.gold() {
        Ok(g) => g,
        Err(e) => {
            return ItemOutcome {
                item_id: item.id.clone(),
                output: None,
                formula: None,
                correct: false,
                error: Some(e),
            }
        }
    };
    let attempt = match cfg.mode {
        ChoiceMode::GoldSanity => Ok((gold.to_string(), gold.clone())),
        ChoiceMode::GivenQuestions => formulate_given(generator, item, exemplars, cfg),
        ChoiceMode::EndToEnd => formulate_end_to_end(generator, item, exemplars, cfg),
    };
    match attempt {
        Ok((output, formula)) => ItemOutcome {
            item_id: item.id.clone(),
            correct: score(&formula, &gold, cfg.equivalence),
            output: Some(output),
            formula: Some(formula),
            error: None,
        },
        Err(e) => ItemOutcome {
            item_id: item.id.clone(),
            output: None,
            formula: None,
            correct: false,
            error: Some(e),
        },
    }
}

/// Runs every `(k, run)` combination. Items whose output is missing or
/// unparseable are scored incorrect.
pub fn run_model_choice(
    generator: &dyn Generator,
    items: &[Qa4pcItem],
    pool: &ExemplarPool,
    cfg: &ModelChoiceConfig,
) -> Result<Vec<RunResult>, DecompositionError> {
    let mut results = Vec::new();
    for &k in &cfg.ks {
        for run in 0..cfg.runs {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, k, run));
            let exemplars = pool.sample(k, &mut rng)?;
            let outcomes: Vec<ItemOutcome> = items
                .par_iter()
                .map(|item| evaluate_item(generator, item, &exemplars, cfg))
                .collect();
            let correct = outcomes.iter().filter(|o| o.correct).count();
            results.push(RunResult {
                k,
                run,
                exemplar_ids: exemplars.iter().map(|e| e.id.clone()).collect(),
                accuracy: if items.is_empty() { 0.0 } else { correct as f64 / items.len() as f64 },
                outcomes,
            });
        }
    }
    Ok(results)
}
