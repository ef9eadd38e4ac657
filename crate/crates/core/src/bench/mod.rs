//! Benchmark harness: question generation, answer extraction with retries,
//! and the task metrics.

pub mod answer;
pub mod clients;
pub mod metrics;
pub mod questions;
pub mod runner;

pub use answer::{extract_answer, AnswerGrammar, InvalidAnswer, ParsedAnswer};
pub use clients::{chat_request, LlmModelClient, OracleClient, ScriptedClient, ToolsClient, SAME_CLASS_COSINE};
pub use metrics::*;
pub use questions::{generate_questions, GroupRef, QType, QuestionInstance, QuestionSet, Task, Truth};
pub use runner::{run_benchmark, Attempt, MetricReport, ModelClient, ModelOutput, QuestionRecord, DEFAULT_ATTEMPTS};
