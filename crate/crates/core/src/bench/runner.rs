use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::{extract_answer, AnswerGrammar, ParsedAnswer};
use super::metrics::*;
use super::questions::{QType, QuestionInstance, QuestionSet, Task, Truth};
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::vision::Modality;

/// What a model sends back for one question.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    Text(String),
    Image(RasterImage),
}

/// Anything that can answer benchmark questions.
pub trait ModelClient: Send + Sync {
    fn name(&self) -> String;

    /// One attempt. `set` resolves the question's image keys. Transport
    /// failures are returned as errors and still consume an attempt.
    fn ask(&self, question: &QuestionInstance, set: &QuestionSet) -> Result<ModelOutput>;
}

/// Default number of attempts per question.
pub const DEFAULT_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Attempt {
    Valid,
    Invalid { reason: String },
    TransportError { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: String,
    pub task: Task,
    pub qtype: QType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_id: Option<String>,
    pub attempts: Vec<Attempt>,
    /// `None` when every attempt was invalid.
    pub answer: Option<ParsedAnswer>,
    pub correct: bool,
    /// Per-question score: probability, IoU, SSIM or F1 where meaningful,
    /// otherwise 1 for correct and 0 for incorrect.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub client: String,
    pub seed: u64,
    pub attempts_per_question: u32,
    /// Questions per task.
    pub counts: BTreeMap<String, usize>,
    /// Task to metric name to value.
    pub metrics: BTreeMap<String, BTreeMap<String, f64>>,
    /// Items left out of a metric and why.
    pub excluded: BTreeMap<String, usize>,
    /// Questions with no valid answer after every attempt; scored incorrect.
    pub invalid_answers: usize,
    /// Interpretations flagged for readers of the report.
    pub notes: BTreeMap<String, String>,
    pub records: Vec<QuestionRecord>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Plain-text table: one row per task and metric.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "client {}  seed {}  attempts {}", self.client, self.seed, self.attempts_per_question);
        let _ = writeln!(out, "{:<16} {:<28} {:>10}", "task", "metric", "value");
        for (task, metrics) in &self.metrics {
            for (name, value) in metrics {
                let _ = writeln!(out, "{task:<16} {name:<28} {value:>10.4}");
            }
        }
        for (name, n) in &self.excluded {
            let _ = writeln!(out, "excluded {name}: {n}");
        }
        let _ = writeln!(out, "invalid answers: {}", self.invalid_answers);
        out
    }

    pub fn metric(&self, task: Task, name: &str) -> Option<f64> {
        self.metrics.get(task.as_str())?.get(name).copied()
    }
}

/// Asks every question, re-asking up to `attempts` times in total while the
/// reply is invalid, then scores and aggregates per task.
///
/// Questions run in parallel; records are sorted by qid before aggregation,
/// so the report does not depend on scheduling.
pub fn run_benchmark(client: &dyn ModelClient, set: &QuestionSet, attempts: u32) -> Result<MetricReport> {
    if attempts == 0 {
        return Err(Error::argument("at least one attempt per question is required"));
    }
    let mut records: Vec<QuestionRecord> = set
        .questions
        .par_iter()
        .map(|q| ask_with_retries(client, q, set, attempts))
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.qid.cmp(&b.qid));
    let questions: BTreeMap<&str, &QuestionInstance> =
        set.questions.iter().map(|q| (q.qid.as_str(), q)).collect();
    aggregate(client.name(), set.seed, attempts, records, &questions)
}

fn ask_with_retries(
    client: &dyn ModelClient,
    q: &QuestionInstance,
    set: &QuestionSet,
    attempts: u32,
) -> Result<QuestionRecord> {
    let grammar = q.grammar();
    let mut log = Vec::new();
    let mut answer = None;
    for _ in 0..attempts {
        match client.ask(q, set) {
            Err(e) => log.push(Attempt::TransportError {
                message: e.to_string(),
            }),
            Ok(output) => match parse_output(output, grammar) {
                Ok(a) => {
                    log.push(Attempt::Valid);
                    answer = Some(a);
                    break;
                }
                Err(reason) => log.push(Attempt::Invalid { reason }),
            },
        }
    }
    let (correct, score) = score(q, answer.as_ref(), set)?;
    Ok(QuestionRecord {
        qid: q.qid.clone(),
        task: q.task,
        qtype: q.qtype,
        group_id: q.group.as_ref().map(|g| g.group_id.clone()),
        candidate_id: q.group.as_ref().map(|g| g.candidate_id.clone()),
        attempts: log,
        answer,
        correct,
        score,
    })
}

fn parse_output(output: ModelOutput, grammar: AnswerGrammar) -> std::result::Result<ParsedAnswer, String> {
    match (output, grammar) {
        (ModelOutput::Image(img), AnswerGrammar::Image) => Ok(ParsedAnswer::Image(img)),
        (ModelOutput::Image(_), _) => Err("expected text, got an image".into()),
        (ModelOutput::Text(t), g) => extract_answer(&t, g).map_err(|e| e.to_string()),
    }
}

fn score(q: &QuestionInstance, answer: Option<&ParsedAnswer>, set: &QuestionSet) -> Result<(bool, f64)> {
    let flag = |b: bool| (b, if b { 1.0 } else { 0.0 });
    Ok(match (&q.truth, answer) {
        (_, None) => (false, 0.0),
        (Truth::SameClass { same }, Some(ParsedAnswer::YesNo(v))) => flag(v == same),
        (Truth::SameClass { same }, Some(ParsedAnswer::Integer(p))) => {
            ((*p >= 50) == *same, *p as f64 / 100.0)
        }
        (Truth::Modality { modality }, Some(ParsedAnswer::Option(c))) => {
            flag(Modality::from_option_letter(*c) == Some(*modality))
        }
        (Truth::Count { count }, Some(ParsedAnswer::Integer(k))) => flag(*k == *count as i64),
        (Truth::Boxes { boxes }, Some(ParsedAnswer::Boxes(pred))) => {
            let m = metric_miou(boxes, pred);
            (m == 1.0, m)
        }
        (Truth::Image { image }, Some(ParsedAnswer::Image(out))) => {
            let target = set.image(image)?;
            if out.width() != target.width() || out.height() != target.height() {
                (false, 0.0)
            } else {
                let s = metric_ssim(out, target)?;
                (s >= 1.0 - 1e-12, s)
            }
        }
        (Truth::Occurrences { instances, categories }, Some(ParsedAnswer::Items(pred))) => {
            let pc: BTreeSet<String> = pred.iter().cloned().collect();
            let r = metric_prf_coverage(pred, instances, &pc, categories)?;
            (r.f1 == 1.0, r.f1)
        }
        _ => (false, 0.0),
    })
}

/// Ranks each group's candidates by score, ties by candidate id.
fn ranked_groups(records: &[&QuestionRecord], questions: &BTreeMap<&str, &QuestionInstance>) -> Vec<RankedQuery> {
    let mut groups: BTreeMap<&str, Vec<(&QuestionRecord, bool)>> = BTreeMap::new();
    for r in records {
        let (Some(g), Truth::SameClass { same }) = (&r.group_id, &questions[r.qid.as_str()].truth) else {
            continue;
        };
        groups.entry(g.as_str()).or_default().push((r, *same));
    }
    groups
        .into_values()
        .map(|mut members| {
            let conf = |r: &QuestionRecord| match &r.answer {
                Some(ParsedAnswer::YesNo(true)) => 1.0,
                Some(ParsedAnswer::YesNo(false)) => 0.0,
                Some(ParsedAnswer::Integer(p)) => *p as f64,
                _ => -1.0,
            };
            members.sort_by(|a, b| {
                conf(b.0)
                    .total_cmp(&conf(a.0))
                    .then(a.0.candidate_id.cmp(&b.0.candidate_id))
            });
            RankedQuery {
                ranked: members.iter().map(|(r, _)| r.candidate_id.clone().unwrap_or_default()).collect(),
                relevant: members
                    .iter()
                    .filter(|(_, same)| *same)
                    .map(|(r, _)| r.candidate_id.clone().unwrap_or_default())
                    .collect(),
            }
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn aggregate(
    client: String,
    seed: u64,
    attempts: u32,
    records: Vec<QuestionRecord>,
    questions: &BTreeMap<&str, &QuestionInstance>,
) -> Result<MetricReport> {
    let mut metrics: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
    let mut notes: BTreeMap<String, String> = BTreeMap::new();

    for task in Task::ALL {
        let rs: Vec<&QuestionRecord> = records.iter().filter(|r| r.task == task).collect();
        if rs.is_empty() {
            continue;
        }
        counts.insert(task.as_str().into(), rs.len());
        let of = |qt: QType| -> Vec<&QuestionRecord> { rs.iter().copied().filter(|r| r.qtype == qt).collect() };
        let accuracy = |xs: &[&QuestionRecord]| mean(xs.iter().map(|r| if r.correct { 1.0 } else { 0.0 }));
        let m = metrics.entry(task.as_str().into()).or_default();
        match task {
            Task::Retrieval => {
                let yn = of(QType::YesNo);
                if !yn.is_empty() {
                    m.insert("yes-no/acc".into(), accuracy(&yn));
                    m.insert("yes-no/map@|yes|".into(), map_at_yes(&ranked_groups(&yn, questions)));
                    notes.insert(
                        "map@|yes|".into(),
                        "candidates ranked by asserted yes (yes > no > invalid, ties by id); AP cut at the number of true positives".into(),
                    );
                }
                let how = of(QType::How);
                if !how.is_empty() {
                    let r = metric_retrieval(&ranked_groups(&how, questions), &[1, 3, 5])?;
                    for (k, v) in &r.recall {
                        m.insert(format!("how/recall@{k}"), *v);
                    }
                    m.insert("how/map@5".into(), r.map_at_5);
                    if r.excluded > 0 {
                        excluded.insert("retrieval groups without a positive".into(), r.excluded);
                    }
                }
            }
            Task::Classification => {
                let yn = of(QType::YesNo);
                if !yn.is_empty() {
                    m.insert("yes-no/acc".into(), accuracy(&yn));
                }
                let how = of(QType::How);
                if !how.is_empty() {
                    let groups = ranked_groups(&how, questions);
                    let answers: Vec<Vec<String>> = groups.iter().map(|g| g.ranked.clone()).collect();
                    let truth: Vec<String> = groups
                        .iter()
                        .map(|g| g.relevant.iter().next().cloned().unwrap_or_default())
                        .collect();
                    m.insert("how/acc@1".into(), metric_accuracy(&answers, &truth, AccuracyMode::AccAt1)?);
                    m.insert("how/acc@5".into(), metric_accuracy(&answers, &truth, AccuracyMode::AccAt5)?);
                }
            }
            Task::Detection => {
                let how = of(QType::How);
                if !how.is_empty() {
                    let mut gt = Vec::new();
                    let mut pred = Vec::new();
                    for r in &how {
                        if let Truth::Count { count } = questions[r.qid.as_str()].truth {
                            gt.push(count);
                            // Invalid answers count as zero characters.
                            pred.push(match r.answer {
                                Some(ParsedAnswer::Integer(k)) => k.clamp(0, u32::MAX as i64) as u32,
                                _ => 0,
                            });
                        }
                    }
                    let o = metric_mre(&gt, &pred)?;
                    m.insert("how/mre".into(), o.mre);
                    m.insert("how/acc".into(), accuracy(&how));
                    if o.excluded_zero_gt > 0 {
                        excluded.insert("detection images with no characters".into(), o.excluded_zero_gt);
                    }
                }
                let wh = of(QType::Where);
                if !wh.is_empty() {
                    m.insert("where/miou".into(), mean(wh.iter().map(|r| r.score)));
                }
            }
            Task::Modality => {
                let which = of(QType::Which);
                let mut answers = Vec::new();
                let mut truth = Vec::new();
                for r in &which {
                    if let Truth::Modality { modality } = questions[r.qid.as_str()].truth {
                        truth.push(modality.as_str().to_string());
                        answers.push(match r.answer {
                            Some(ParsedAnswer::Option(c)) => Modality::from_option_letter(c)
                                .map(|m| vec![m.as_str().to_string()])
                                .unwrap_or_default(),
                            _ => Vec::new(),
                        });
                    }
                }
                for mode in [AccuracyMode::Acc, AccuracyMode::MacroPrecision, AccuracyMode::MacroRecall] {
                    m.insert(format!("which/{}", mode.as_str()), metric_accuracy(&answers, &truth, mode)?);
                }
            }
            Task::Generation => {
                m.insert("generate/ssim".into(), mean(rs.iter().map(|r| r.score)));
            }
            Task::CaseRetrieval => {
                let mut pred = Vec::new();
                let mut real = Vec::new();
                let mut pred_cats = BTreeSet::new();
                let mut real_cats = BTreeSet::new();
                for r in &rs {
                    if let Truth::Occurrences { instances, categories } = &questions[r.qid.as_str()].truth {
                        // Items are namespaced by question so counts never mix.
                        let tag = |x: &String| format!("{}:{x}", r.qid);
                        real.extend(instances.iter().map(tag));
                        real_cats.extend(categories.iter().map(tag));
                        if let Some(ParsedAnswer::Items(items)) = &r.answer {
                            pred.extend(items.iter().map(tag));
                            pred_cats.extend(items.iter().map(tag));
                        }
                    }
                }
                let p = metric_prf_coverage(&pred, &real, &pred_cats, &real_cats)?;
                m.insert("list/precision".into(), p.precision);
                m.insert("list/recall".into(), p.recall);
                m.insert("list/f1".into(), p.f1);
                m.insert("list/coverage".into(), p.coverage);
            }
        }
    }
    let invalid_answers = records.iter().filter(|r| r.answer.is_none()).count();
    Ok(MetricReport {
        client,
        seed,
        attempts_per_question: attempts,
        counts,
        metrics,
        excluded,
        invalid_answers,
        notes,
        records,
    })
}
