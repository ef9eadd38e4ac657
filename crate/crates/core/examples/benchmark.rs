//! Scores the oracle and the tool baseline on a small synthetic corpus.
//!
//!     cargo run --example benchmark -p scriptorium

use scriptorium::bench::{generate_questions, run_benchmark, OracleClient, QuestionSet, Task, ToolsClient, DEFAULT_ATTEMPTS};
use scriptorium::synth::{generate_corpus, SynthConfig};
use scriptorium::vision::VisionTools;

fn main() -> scriptorium::error::Result<()> {
    let corpus = generate_corpus(&SynthConfig::default())?;
    let kb = corpus.build_snapshot()?;

    let mut set = QuestionSet::default();
    for (task, n) in [
        (Task::Retrieval, 20),
        (Task::Classification, 20),
        (Task::Detection, 10),
        (Task::Modality, 20),
        (Task::Generation, 5),
        (Task::CaseRetrieval, 5),
    ] {
        set.extend(generate_questions(&kb, task, n, 7)?);
    }
    set.seed = 7;
    println!("{} questions", set.questions.len());

    let oracle = run_benchmark(&OracleClient, &set, DEFAULT_ATTEMPTS)?;
    print!("{}", oracle.to_table());
    let tools = run_benchmark(&ToolsClient::new(kb, VisionTools::new()), &set, DEFAULT_ATTEMPTS)?;
    print!("{}", tools.to_table());
    Ok(())
}
