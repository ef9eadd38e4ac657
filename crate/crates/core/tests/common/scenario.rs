//! The two-turn research dialogue used by the agent tests and the
//! acceptance run: analyse an uploaded rubbing, then ask which catalogues
//! record the first detected character without uploading anything.

#![allow(dead_code)]

use std::sync::Arc;

use scriptorium::agent::*;
use scriptorium::kb::KbSnapshot;
use scriptorium::raster::RasterImage;

pub const ANALYZE: &str = "Please analyze this rubbing.";
pub const FOLLOW_UP: &str = "Which catalogues record this character?";

/// Tools expected in each group of the analysis turn.
pub const ANALYZE_GROUPS: [&[&str]; 4] = [
    &["classify_modality"],
    &["detect_characters"],
    &["retrieve_rubbings"],
    &["retrieve_texts", "interpret_fragment"],
];

pub fn group_tools(outcome: &TurnOutcome) -> Vec<Vec<String>> {
    outcome
        .plan
        .groups
        .iter()
        .map(|g| g.iter().map(|c| c.tool.clone()).collect())
        .collect()
}

pub fn run(agent: &Agent, rubbing: &RasterImage) -> (TurnOutcome, TurnOutcome, SessionState) {
    let mut state = SessionState::new("scenario");
    let first = agent
        .run_turn(&mut state, TurnInput::text(ANALYZE).with_image(ImageInput::Raster(rubbing.clone())))
        .expect("analysis turn");
    let second = agent.run_turn(&mut state, TurnInput::text(FOLLOW_UP)).expect("follow-up turn");
    (first, second, state)
}

/// Scripted LLM whose rewrite of each turn's findings is a fixed sentence.
/// Built by replaying the scenario once without rewriting.
pub fn scripted_llm(kb: &KbSnapshot, rubbing: &RasterImage) -> Arc<ScriptedLlm> {
    let (first, second, _) = run(&Agent::new(kb.clone()), rubbing);
    let llm = ScriptedLlm::new();
    for (n, o) in [first, second].iter().enumerate() {
        llm.insert(&rewrite_request(&o.prompt, &o.response), format!("Scripted answer {}.", n + 1));
    }
    Arc::new(llm)
}

pub fn scripted_agent(kb: &KbSnapshot, rubbing: &RasterImage) -> Agent {
    Agent::new(kb.clone())
        .with_llm(scripted_llm(kb, rubbing))
        .with_planner(PlannerMode::Rule)
        .with_rewrite(true)
}
