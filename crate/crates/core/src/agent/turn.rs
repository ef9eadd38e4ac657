use std::sync::Arc;

use serde::Serialize;

use super::execute::execute_plan;
use super::llm::{ChatRequest, LlmClient, OffLlm};
use super::memory::{update_memory, Artifact, ArtifactKind, ArtifactSummary, SessionState, TurnRecord};
use super::perceive::{assemble_prompt, perceive, AssembledPrompt, Goal, Intent, PerceivedImage, TurnInput, PREAMBLE};
use super::plan::{plan, plan_rule, Plan, PlanInputs, PlannerMode};
use super::render::render_response;
use super::trace::TraceEvent;
use crate::error::{Error, Result};
use crate::kb::KbSnapshot;
use crate::vision::VisionTools;

/// Everything a caller gets back from one turn.
#[derive(Debug, Clone, Serialize)]
pub struct TurnOutcome {
    pub session_id: String,
    pub turn: u64,
    pub goal: Goal,
    pub images: Vec<PerceivedImage>,
    pub referenced: Vec<String>,
    pub prompt: AssembledPrompt,
    pub plan: Plan,
    pub response: String,
    /// Template rendering, kept when an LLM rewrote `response`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draft: Option<String>,
    pub artifacts: Vec<ArtifactSummary>,
    pub trace: Vec<TraceEvent>,
}

/// The observe, plan, act loop over one knowledge base.
#[derive(Clone)]
pub struct Agent {
    kb: KbSnapshot,
    vision: VisionTools,
    llm: Arc<dyn LlmClient>,
    planner: PlannerMode,
    rewrite: bool,
}

impl Agent {
    /// Rule planner, no LLM, built-in vision.
    pub fn new(kb: KbSnapshot) -> Self {
        Self {
            kb,
            vision: VisionTools::new(),
            llm: Arc::new(OffLlm),
            planner: PlannerMode::Rule,
            rewrite: false,
        }
    }

    pub fn with_llm(mut self, llm: Arc<dyn LlmClient>) -> Self {
        self.llm = llm;
        self
    }

    pub fn with_planner(mut self, mode: PlannerMode) -> Self {
        self.planner = mode;
        self
    }

    pub fn with_vision(mut self, vision: VisionTools) -> Self {
        self.vision = vision;
        self
    }

    /// Let the LLM rewrite the rendered answer. Falls back to the rendering
    /// when the model is unavailable.
    pub fn with_rewrite(mut self, rewrite: bool) -> Self {
        self.rewrite = rewrite;
        self
    }

    pub fn kb(&self) -> &KbSnapshot {
        &self.kb
    }

    pub fn vision(&self) -> &VisionTools {
        &self.vision
    }

    /// Runs one turn. Argument errors leave `state` untouched; tool failures
    /// only show up in the trace.
    pub fn run_turn(&self, state: &mut SessionState, input: TurnInput) -> Result<TurnOutcome> {
        let perception = perceive(&input, state, &self.vision)?;
        let turn = perception.turn;
        let prompt = assemble_prompt(&input.query, &perception, state);
        let inputs = PlanInputs::from_perception(&perception);
        let plan = match plan(self.planner, self.llm.as_ref(), &perception.goal, &inputs, &prompt) {
            Err(Error::Planning(why)) if perception.goal.intent != Intent::Freeform => {
                let fallback = Goal {
                    intent: Intent::Freeform,
                    ..perception.goal.clone()
                };
                let mut p = plan_rule(&fallback, &inputs)?;
                p.note = Some(format!("{why}; answered as freeform"));
                p
            }
            other => other?,
        };

        let mut table = state.artifacts.clone();
        let mut new_artifacts = Vec::new();
        for img in &perception.images {
            if let Some(image) = &img.image {
                let a = Artifact {
                    handle: img.handle.clone(),
                    turn,
                    origin: "input".into(),
                    kind: ArtifactKind::Image {
                        image: image.clone(),
                        modality: img.modality,
                    },
                };
                table.insert(a.clone());
                new_artifacts.push(a);
            }
        }
        let exec = execute_plan(&self.kb, &self.vision, &plan, &table, turn)?;
        new_artifacts.extend(exec.artifacts);

        let draft = render_response(&exec.events, plan.note.as_deref());
        let (response, draft) = match self.rewrite.then(|| self.rewrite_response(&prompt, &draft)) {
            Some(Ok(text)) => (text, Some(draft)),
            _ => (draft, None),
        };

        let record = TurnRecord {
            turn,
            query: input.query.clone(),
            input_handles: perception
                .images
                .iter()
                .filter(|i| i.error.is_none())
                .map(|i| i.handle.clone())
                .collect(),
            referenced: perception.referenced.iter().map(|r| r.handle.clone()).collect(),
            goal: perception.goal.clone(),
            prompt: prompt.clone(),
            plan: plan.clone(),
            trace: exec.events.clone(),
            response: response.clone(),
            new_artifacts: new_artifacts.iter().map(|a| a.handle.clone()).collect(),
        };
        let outcome = TurnOutcome {
            session_id: state.session_id.clone(),
            turn,
            goal: perception.goal.clone(),
            referenced: record.referenced.clone(),
            images: perception.images,
            prompt,
            plan,
            response,
            draft,
            artifacts: new_artifacts.iter().map(Artifact::summary).collect(),
            trace: exec.events,
        };
        *state = update_memory(std::mem::take(state), record, new_artifacts);
        Ok(outcome)
    }

    fn rewrite_response(&self, prompt: &AssembledPrompt, draft: &str) -> Result<String> {
        Ok(self.llm.complete(&rewrite_request(prompt, draft))?.text)
    }
}

/// Request sent when the agent asks the LLM to phrase the final answer.
pub fn rewrite_request(prompt: &AssembledPrompt, draft: &str) -> ChatRequest {
    ChatRequest::new(
        Some(PREAMBLE),
        format!(
            "{}\n\nTool findings:\n{draft}\n\nRewrite the findings as a short answer to the query.",
            prompt.render()
        ),
    )
}
