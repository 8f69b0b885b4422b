//! BLEU for generated follow-up questions.
//!
//! Text is lowercased, punctuation becomes whitespace, and tokens are split
//! on whitespace. Precisions are clipped n-gram matches over candidate
//! n-gram counts; a zero match count at order n > 1 is replaced by
//! `EPSILON / count` (add-epsilon smoothing). A candidate with no unigram
//! match scores 0. Orders at which the candidate has no n-grams at all are
//! left out of the geometric mean (effective order), so a candidate shorter
//! than `max_n` is not penalized for n-grams it cannot contain. Brevity
//! penalty is `exp(1 - r/c)` when `c <= r`.

use std::collections::HashMap;

pub const EPSILON: f64 = 0.1;

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate n-gram count at each order `1..=max_n`.
#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    matches: Vec<usize>,
    totals: Vec<usize>,
    candidate_len: usize,
    reference_len: usize,
}

impl Tally {
    fn new(max_n: usize) -> Self {
        Tally {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            ..Tally::default()
        }
    }

    fn add(&mut self, candidate: &[String], reference: &[String]) {
        for n in 1..=self.matches.len() {
            let cand = ngrams(candidate, n);
            let refs = ngrams(reference, n);
            self.matches[n - 1] += cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum::<usize>();
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1);
        }
        self.candidate_len += candidate.len();
        self.reference_len += reference.len();
    }

    fn score(&self) -> f64 {
        if self.matches.is_empty() || self.matches[0] == 0 || self.candidate_len == 0 {
            return 0.0;
        }
        let logs: Vec<f64> = self
            .matches
            .iter()
            .zip(&self.totals)
            .filter(|(_, &t)| t > 0)
            .map(|(&m, &t)| {
                let t = t as f64;
                let p = if m == 0 { EPSILON / t } else { m as f64 / t };
                p.ln()
            })
            .collect();
        let log_mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        (bp * log_mean.exp()).clamp(0.0, 1.0)
    }
}

/// Sentence BLEU with uniform weights over orders `1..=max_n`.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> f64 {
    let mut tally = Tally::new(max_n);
    tally.add(&tokenize(candidate), &tokenize(reference));
    tally.score()
}

/// Corpus BLEU: counts are summed over all pairs before precisions and the
/// brevity penalty are computed.
pub fn corpus_bleu<'a, I>(pairs: I, max_n: usize) -> Option<f64>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut tally = Tally::new(max_n);
    let mut any = false;
    for (candidate, reference) in pairs {
        tally.add(&tokenize(candidate), &tokenize(reference));
        any = true;
    }
    any.then(|| tally.score())
}
