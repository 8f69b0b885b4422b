mod common;

use common::*;
use policylogic::decomposition::ExemplarPool;
use policylogic::evaluation::metrics::{Class, ClassCounts};
use policylogic::evaluation::model_choice::{run_model_choice, ChoiceMode};
use policylogic::evaluation::{load_qa4pc, load_sharc, report, run_sharc};
use policylogic::backends::fixtures::ReplayGenerator;

#[test]
fn minidev_report_matches_hand_count() {
    let utterances = load_sharc(fixture("minidev", "sharc_dev.json")).unwrap();
    assert_eq!(utterances.len(), 9);
    let results = run_sharc(&replay_engine("minidev"), &utterances, None);
    let r = report(&results).unwrap();

    assert_eq!((r.total, r.correct, r.errors), (9, 6, 0));
    assert_eq!(r.micro_accuracy, 6.0 / 9.0);
    assert_eq!(r.macro_accuracy, 0.5);
    let counts = |gold, predicted, correct| ClassCounts { gold, predicted, correct };
    assert_eq!(r.per_class[&Class::Yes], counts(4, 5, 4));
    assert_eq!(r.per_class[&Class::No], counts(2, 2, 1));
    assert_eq!(r.per_class[&Class::Irrelevant], counts(1, 0, 0));
    assert_eq!(r.per_class[&Class::FollowUp], counts(2, 2, 1));
    // mini-08 is the only follow-up/follow-up pair and its text is exact.
    assert_eq!((r.bleu_pairs, r.bleu1, r.bleu4), (1, Some(1.0), Some(1.0)));
    assert_eq!(r.diversity.values().sum::<usize>(), 9);

    let expected: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("minidev", "expected_report.json")).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&r).unwrap(), expected);
}

#[test]
fn limit_takes_a_prefix() {
    let utterances = load_sharc(fixture("minidev", "sharc_dev.json")).unwrap();
    let results = run_sharc(&replay_engine("minidev"), &utterances, Some(4));
    let ids: Vec<_> = results.iter().map(|r| r.utterance_id.as_str()).collect();
    assert_eq!(ids, ["mini-01", "mini-02", "mini-03", "mini-04"]);
}

#[test]
fn dev50_replay_is_byte_stable() {
    let utterances = load_sharc(fixture("dev50", "sharc_dev.json")).unwrap();
    assert_eq!(utterances.len(), 50);
    let engine = replay_engine("dev50");
    let first = run_sharc(&engine, &utterances, Some(50));
    assert!(first.iter().all(|r| r.error.is_none()));
    let a = serde_json::to_string(&report(&first).unwrap()).unwrap();
    let b = serde_json::to_string(&report(&run_sharc(&replay_engine("dev50"), &utterances, Some(50))).unwrap()).unwrap();
    assert_eq!(a, b);
    let r = report(&first).unwrap();
    assert_eq!(r.diversity.values().sum::<usize>(), 50);
    assert!(r.per_class[&Class::Irrelevant].correct >= 5);
    assert!(first.iter().any(|c| c.decision.as_ref().is_some_and(|d| d.trace.filter.iter().any(|f| !f.keep))));
    assert!(first.iter().any(|c| c.decision.as_ref().is_some_and(|d| !d.trace.samples.as_ref().unwrap().rejected.is_empty())));
}

#[test]
fn model_choice_replay_is_reproducible() {
    let items = load_qa4pc(fixture("qa4pc", "items.json")).unwrap();
    let generator = ReplayGenerator::new(replay_store("qa4pc"));
    let pool = ExemplarPool::builtin();
    let cfg = model_choice_config(ChoiceMode::GivenQuestions);
    let runs = run_model_choice(&generator, &items, &pool, &cfg).unwrap();
    assert_eq!(runs.len(), 6);
    for run in &runs {
        // Items 4 (wrong connective) and 6 (malformed output) miss.
        assert_eq!(run.accuracy, 4.0 / 6.0, "k={} run={}", run.k, run.run);
        let malformed = run.outcomes.iter().find(|o| o.item_id == "mc-6").unwrap();
        assert!(!malformed.correct && malformed.error.as_ref().unwrap().contains("Q0 and and Q1"));
        assert_eq!(run.exemplar_ids.len(), run.k);
    }
    assert_ne!(runs[2].exemplar_ids, runs[3].exemplar_ids, "runs draw different exemplars");
    assert_eq!(runs, run_model_choice(&generator, &items, &pool, &cfg).unwrap());

    let e2e = run_model_choice(&generator, &items, &pool, &model_choice_config(ChoiceMode::EndToEnd)).unwrap();
    assert!(e2e.iter().all(|r| r.accuracy == 4.0 / 6.0));

    let sanity = run_model_choice(&generator, &items, &pool, &model_choice_config(ChoiceMode::GoldSanity)).unwrap();
    assert!(sanity.iter().all(|r| r.accuracy == 1.0));
}
