use criterion::{black_box, criterion_group, criterion_main, Criterion};
use policylogic::consistency::{select_consistent, SampleSet};
use policylogic::evaluation::{bleu, corpus_bleu};
use policylogic::parse;

fn bench_bleu(c: &mut Criterion) {
    let cand = "do you need to repair or replace your primary residence";
    let reference = "do you need to repair or replace personal property in the declared area";
    c.bench_function("bleu/sentence4", |b| b.iter(|| bleu(black_box(cand), black_box(reference), 4)));
    let pairs: Vec<(&str, &str)> = std::iter::repeat_n((cand, reference), 500).collect();
    c.bench_function("bleu/corpus500", |b| b.iter(|| corpus_bleu(pairs.iter().copied(), 4)));
}

fn bench_selection(c: &mut Criterion) {
    let set = SampleSet::from_formulas(
        ["not (Q0 and Q1) or Q2", "not Q0 or not Q1 or Q2", "Q0 and Q1 and Q2", "Q2 or not Q1 or not Q0", "Q0"]
            .iter()
            .map(|s| parse(s).unwrap())
            .collect(),
    );
    c.bench_function("select_consistent/5", |b| b.iter(|| select_consistent(black_box(&set)).unwrap()));
}

criterion_group!(benches, bench_bleu, bench_selection);
criterion_main!(benches);
