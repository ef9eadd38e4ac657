//! Agent loop: perceive the turn, assemble a prompt, plan tool calls,
//! execute them group by group, and remember everything per session.

mod execute;
pub mod llm;
mod memory;
mod perceive;
mod plan;
mod render;
pub mod tools;
mod trace;
mod turn;

pub use execute::{execute_plan, result_handle, Execution};
pub use llm::{ChatRequest, Completion, LlmClient, LlmConfig, LlmMode, OffLlm, RemoteLlm, ScriptedLlm};
pub use memory::{update_memory, Artifact, ArtifactKind, ArtifactSummary, ArtifactTable, SessionState, TurnRecord};
pub use perceive::{
    assemble_prompt, infer_intent, input_handle, perceive, resolve_references, AssembledPrompt,
    DescriptorSummary, EvidenceBlock, Goal, ImageInput, Intent, PerceivedImage, PerceptionResult,
    ReferencedArtifact, TurnInput, INTENT_RULES, PREAMBLE,
};
pub use plan::{
    arg_ref, from_ref, plan, plan_llm, plan_rule, planner_request, template_table_problems, template_utilities, templates,
    utility, validate_plan, ArgTemplate, Plan, PlanInputs, PlanSource, PlannedCall, PlannerMode,
    Requirement, Template, PLANNER_SYSTEM,
};
pub use render::{render_response, summarize_event};
pub use tools::{catalog, dispatch, run_tool, tool_spec, validate_args, ImageOutputs, NoArtifacts, ToolContext, ToolSpec};
pub use trace::{canonical_trace, CallOutcome, TraceEvent};
pub use turn::{rewrite_request, Agent, TurnOutcome};
