mod common;

use std::sync::OnceLock;

use scriptorium::bench::*;
use scriptorium::kb::KbSnapshot;
use scriptorium::synth::{generate_corpus, SynthConfig};

fn kb() -> &'static KbSnapshot {
    static KB: OnceLock<KbSnapshot> = OnceLock::new();
    KB.get_or_init(|| generate_corpus(&SynthConfig::default()).unwrap().build_snapshot().unwrap())
}

fn small_set() -> QuestionSet {
    let mut set = QuestionSet::default();
    for (task, n) in [
        (Task::Retrieval, 4),
        (Task::Classification, 4),
        (Task::Detection, 3),
        (Task::Modality, 4),
        (Task::Generation, 2),
        (Task::CaseRetrieval, 2),
    ] {
        let part = generate_questions(kb(), task, n, 11).unwrap();
        set.seed = part.seed;
        set.extend(part);
    }
    set
}

#[test]
fn answer_grammar_table() {
    assert!(common::answer_cases::cases().len() >= 30);
    let failures = common::answer_cases::failures();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn persistent_garbage_costs_exactly_three_attempts() {
    let set = small_set();
    let client = ScriptedClient::constant("I would rather not say.");
    let report = run_benchmark(&client, &set, DEFAULT_ATTEMPTS).unwrap();
    assert_eq!(client.calls(), 3 * set.questions.len());
    assert_eq!(report.invalid_answers, set.questions.len());
    for r in &report.records {
        assert_eq!(r.attempts.len(), 3, "{}", r.qid);
        assert!(!r.correct && r.answer.is_none());
    }
}

#[test]
fn valid_answer_stops_retrying() {
    let set = generate_questions(kb(), Task::Modality, 4, 3).unwrap();
    let client = ScriptedClient::constant("B");
    let report = run_benchmark(&client, &set, DEFAULT_ATTEMPTS).unwrap();
    assert_eq!(client.calls(), 4);
    assert!(report.records.iter().all(|r| r.attempts == vec![Attempt::Valid]));
}

#[test]
fn oracle_client_is_perfect() {
    let report = run_benchmark(&OracleClient, &small_set(), DEFAULT_ATTEMPTS).unwrap();
    for (task, metrics) in &report.metrics {
        for (name, value) in metrics {
            let want = if name.ends_with("mre") { 0.0 } else { 1.0 };
            assert!((value - want).abs() < 1e-9, "{task} {name} = {value}");
        }
    }
    assert_eq!(report.invalid_answers, 0);
}

#[test]
fn scripted_replay_of_oracle_matches_text_tasks() {
    let set = generate_questions(kb(), Task::Detection, 3, 5).unwrap();
    let fixtures = ScriptedClient::record_oracle(&set).unwrap();
    let replay = run_benchmark(&ScriptedClient::new(fixtures), &set, 1).unwrap();
    let direct = run_benchmark(&OracleClient, &set, 1).unwrap();
    assert_eq!(replay.metrics, direct.metrics);
}

#[test]
fn report_ignores_question_order() {
    let set = small_set();
    let mut reversed = set.clone();
    reversed.questions.reverse();
    let client = ToolsClient::new(kb().clone(), Default::default());
    let a = run_benchmark(&client, &set, 1).unwrap();
    let b = run_benchmark(&client, &reversed, 1).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.records, b.records);
}

#[test]
fn zero_attempts_is_rejected() {
    assert!(run_benchmark(&OracleClient, &small_set(), 0).is_err());
}
