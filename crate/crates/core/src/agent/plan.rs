//! Plans, their structural validation, and the two planners.
//!
//! Rule planner: every template of the goal's intent is scored by an
//! additive utility, +1 per step whose required input is available and
//! negative infinity if any is not. The highest score wins; ties go to the
//! smaller template id. If no template of the intent applies, planning fails.
//!
//! LLM planner: the model returns `{"groups": [[{"call_id", "tool", "args"}]]}`.
//! An invalid plan gets one repair round with the validation errors; a second
//! failure (or an unavailable model) hands over to the rule planner.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::llm::{ChatRequest, LlmClient};
use super::perceive::{AssembledPrompt, Goal, Intent, PerceptionResult};
use super::tools::{catalog, validate_args, ParamType, ToolSpec};
use crate::error::{Error, Result};
use crate::vision::Modality;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedCall {
    pub call_id: String,
    pub tool: String,
    /// Literal values, image handles, or `{"$from": call_id, "path": json-pointer}`.
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "planner", rename_all = "kebab-case")]
pub enum PlanSource {
    Rule { template: String, utility: f64 },
    Llm { repaired: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub source: PlanSource,
    /// Groups run in order; calls inside a group are independent.
    pub groups: Vec<Vec<PlannedCall>>,
    /// Why the plan differs from what was asked for, if it does.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Plan {
    pub fn calls(&self) -> impl Iterator<Item = &PlannedCall> {
        self.groups.iter().flatten()
    }

    /// Data-flow edges `(producer, consumer)`.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for call in self.calls() {
            for v in call.args.values() {
                if let Some((from, _)) = arg_ref(v) {
                    out.push((from.to_string(), call.call_id.clone()));
                }
            }
        }
        out
    }
}

/// `{"$from": "c3", "path": "/hits/0/target_id"}` as `(call_id, pointer)`.
pub fn arg_ref(v: &Value) -> Option<(&str, &str)> {
    let o = v.as_object()?;
    let from = o.get("$from")?.as_str()?;
    let path = o.get("path").and_then(Value::as_str).unwrap_or("");
    (o.len() <= 2).then_some((from, path))
}

pub fn from_ref(call_id: &str, path: &str) -> Value {
    json!({ "$from": call_id, "path": path })
}

fn placeholder(ty: ParamType) -> Value {
    match ty {
        ParamType::PositiveInt => json!(1),
        ParamType::Choice(options) => json!(options[0]),
        _ => json!("ref"),
    }
}

/// Structural checks: non-empty groups, unique call ids, known tools,
/// literal arguments valid, and every reference pointing at a call in an
/// earlier group (so data flow is acyclic).
pub fn validate_plan(plan: &Plan, tools: &[ToolSpec]) -> std::result::Result<(), Vec<String>> {
    let mut problems = Vec::new();
    if plan.groups.is_empty() {
        problems.push("plan has no groups".to_string());
    }
    let mut earlier: BTreeSet<&str> = BTreeSet::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (g, group) in plan.groups.iter().enumerate() {
        if group.is_empty() {
            problems.push(format!("groups[{g}]: empty group"));
        }
        for call in group {
            let at = format!("groups[{g}].{}", call.call_id);
            if call.call_id.trim().is_empty() || !seen.insert(call.call_id.as_str()) {
                problems.push(format!("{at}: call_id missing or repeated"));
            }
            let Some(spec) = tools.iter().find(|t| t.name == call.tool) else {
                problems.push(format!("{at}: unknown tool {:?}", call.tool));
                continue;
            };
            let mut literal = call.args.clone();
            for (name, v) in &call.args {
                if let Some((from, _)) = arg_ref(v) {
                    if !earlier.contains(from) {
                        problems.push(format!("{at}.args.{name}: reference to {from:?} is not an earlier group"));
                    }
                    if let Some(p) = spec.params.iter().find(|p| p.name == name) {
                        literal.insert(name.clone(), placeholder(p.ty));
                    }
                }
            }
            if let Err(ps) = validate_args(spec, &literal) {
                problems.extend(ps.into_iter().map(|p| format!("{at}.{p}")));
            }
        }
        earlier.extend(group.iter().map(|c| c.call_id.as_str()));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

/// What a template step needs from the turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    /// A non-empty query.
    Query,
    AnyImage,
    /// Whole rubbing or whole facsimile.
    WholeImage,
    /// Any single-character image.
    GlyphImage,
    SingleRubbing,
    SingleFacsimile,
    /// Only the outputs of earlier steps.
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgTemplate {
    /// The focus image handle.
    Focus,
    QueryText,
    Lit(Value),
    /// `(1-based call number in plan order, json pointer)`.
    From(usize, &'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallTemplate {
    pub tool: &'static str,
    pub args: Vec<(&'static str, ArgTemplate)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub requires: Requirement,
    pub calls: Vec<CallTemplate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub id: &'static str,
    pub intent: Intent,
    pub steps: Vec<Step>,
}

fn call(tool: &'static str, args: Vec<(&'static str, ArgTemplate)>) -> CallTemplate {
    CallTemplate { tool, args }
}

fn step(requires: Requirement, calls: Vec<CallTemplate>) -> Step {
    Step { requires, calls }
}

/// The workflow table.
pub fn templates() -> Vec<Template> {
    use ArgTemplate::*;
    use Requirement::*;
    let focus = || vec![("image", Focus)];
    vec![
        Template {
            id: "analyze-rubbing/whole",
            intent: Intent::AnalyzeRubbing,
            steps: vec![
                step(WholeImage, vec![call("classify_modality", focus())]),
                step(WholeImage, vec![call("detect_characters", focus())]),
                step(WholeImage, vec![call("retrieve_rubbings", vec![("image", Focus), ("k", Lit(json!(3)))])]),
                step(
                    Prior,
                    vec![
                        call("retrieve_texts", vec![("query", From(3, "/hits/0/interpretations/0/text"))]),
                        call("interpret_fragment", vec![("fragment_id", From(3, "/hits/0/target_id"))]),
                    ],
                ),
            ],
        },
        Template {
            id: "identify-character/crop",
            intent: Intent::IdentifyCharacter,
            steps: vec![
                step(SingleRubbing, vec![call("denoise_character", focus())]),
                step(Prior, vec![call("retrieve_glyphs", vec![("image", From(1, "/image")), ("k", Lit(json!(5)))])]),
                step(Prior, vec![call("lookup_dictionary", vec![("class_id", From(2, "/hits/0/label"))])]),
            ],
        },
        Template {
            id: "identify-character/facsimile",
            intent: Intent::IdentifyCharacter,
            steps: vec![
                step(SingleFacsimile, vec![call("retrieve_glyphs", vec![("image", Focus), ("k", Lit(json!(5)))])]),
                step(Prior, vec![call("lookup_dictionary", vec![("class_id", From(1, "/hits/0/label"))])]),
            ],
        },
        Template {
            id: "identify-character/whole",
            intent: Intent::IdentifyCharacter,
            steps: vec![
                step(WholeImage, vec![call("detect_characters", focus())]),
                step(Prior, vec![call("classify_glyph", vec![("image", From(1, "/detections/0/crop"))])]),
                step(Prior, vec![call("lookup_dictionary", vec![("class_id", From(2, "/class_id"))])]),
            ],
        },
        Template {
            id: "lookup-literature/glyph",
            intent: Intent::LookupLiterature,
            steps: vec![
                step(GlyphImage, vec![call("classify_glyph", focus())]),
                step(Prior, vec![call("lookup_dictionary", vec![("class_id", From(1, "/class_id"))])]),
            ],
        },
        Template {
            id: "lookup-literature/text",
            intent: Intent::LookupLiterature,
            steps: vec![step(Query, vec![call("retrieve_texts", vec![("query", QueryText), ("k", Lit(json!(5)))])])],
        },
        Template {
            id: "find-occurrences/glyph",
            intent: Intent::FindOccurrences,
            steps: vec![
                step(GlyphImage, vec![call("classify_glyph", focus())]),
                step(
                    Prior,
                    vec![
                        call("lookup_dictionary", vec![("class_id", From(1, "/class_id"))]),
                        call(
                            "retrieve_glyphs",
                            vec![("image", Focus), ("k", Lit(json!(10))), ("index", Lit(json!("instances")))],
                        ),
                    ],
                ),
            ],
        },
        Template {
            id: "find-occurrences/text",
            intent: Intent::FindOccurrences,
            steps: vec![step(Query, vec![call("retrieve_texts", vec![("query", QueryText), ("k", Lit(json!(10)))])])],
        },
        Template {
            id: "generate-facsimile/glyph",
            intent: Intent::GenerateFacsimile,
            steps: vec![step(GlyphImage, vec![call("denoise_character", focus())])],
        },
        Template {
            id: "generate-facsimile/whole",
            intent: Intent::GenerateFacsimile,
            steps: vec![step(WholeImage, vec![call("generate_facsimile", focus())])],
        },
        Template {
            id: "freeform/image",
            intent: Intent::Freeform,
            steps: vec![step(AnyImage, vec![call("classify_modality", focus())])],
        },
        Template {
            id: "freeform/text",
            intent: Intent::Freeform,
            steps: vec![step(Query, vec![call("retrieve_texts", vec![("query", QueryText), ("k", Lit(json!(5)))])])],
        },
    ]
}

/// What the planner can see of the turn.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanInputs {
    pub query: String,
    pub focus: Option<(String, Option<Modality>)>,
}

impl PlanInputs {
    pub fn from_perception(p: &PerceptionResult) -> Self {
        Self {
            query: p.goal.query.clone(),
            focus: p.focus(),
        }
    }

    fn available(&self, r: Requirement) -> bool {
        let m = self.focus.as_ref().and_then(|f| f.1);
        match r {
            Requirement::Query => !self.query.trim().is_empty(),
            Requirement::AnyImage => self.focus.is_some(),
            Requirement::WholeImage => m.is_some_and(Modality::is_whole),
            Requirement::GlyphImage => m.is_some_and(|m| !m.is_whole()),
            Requirement::SingleRubbing => m == Some(Modality::SingleRubbing),
            Requirement::SingleFacsimile => m == Some(Modality::SingleFacsimile),
            Requirement::Prior => true,
        }
    }
}

pub fn utility(template: &Template, inputs: &PlanInputs) -> f64 {
    template.steps.iter().fold(0.0, |acc, s| {
        if inputs.available(s.requires) {
            acc + 1.0
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Utilities of every template of `intent`, in table order.
pub fn template_utilities(intent: Intent, inputs: &PlanInputs) -> Vec<(&'static str, f64)> {
    templates()
        .iter()
        .filter(|t| t.intent == intent)
        .map(|t| (t.id, utility(t, inputs)))
        .collect()
}

fn instantiate(t: &Template, inputs: &PlanInputs, u: f64) -> Plan {
    let mut n = 0usize;
    let groups = t
        .steps
        .iter()
        .map(|s| {
            s.calls
                .iter()
                .map(|c| {
                    n += 1;
                    let args = c
                        .args
                        .iter()
                        .map(|(name, a)| {
                            let v = match a {
                                ArgTemplate::Focus => json!(inputs.focus.as_ref().map(|f| f.0.clone())),
                                ArgTemplate::QueryText => json!(inputs.query),
                                ArgTemplate::Lit(v) => v.clone(),
                                ArgTemplate::From(i, path) => from_ref(&format!("c{i}"), path),
                            };
                            (name.to_string(), v)
                        })
                        .collect();
                    PlannedCall {
                        call_id: format!("c{n}"),
                        tool: c.tool.to_string(),
                        args,
                    }
                })
                .collect()
        })
        .collect();
    Plan {
        source: PlanSource::Rule {
            template: t.id.to_string(),
            utility: u,
        },
        groups,
        note: None,
    }
}

/// Deterministic template planner.
pub fn plan_rule(goal: &Goal, inputs: &PlanInputs) -> Result<Plan> {
    if goal.query.trim().is_empty() && goal.handles.is_empty() {
        return Err(Error::argument("goal has neither query text nor images"));
    }
    let table = templates();
    let best = table
        .iter()
        .filter(|t| t.intent == goal.intent)
        .map(|t| (t, utility(t, inputs)))
        .filter(|(_, u)| u.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.id.cmp(a.0.id)));
    match best {
        Some((t, u)) => Ok(instantiate(t, inputs, u)),
        None => Err(Error::Planning(format!(
            "no {} workflow applies to the available inputs",
            goal.intent.as_str()
        ))),
    }
}

pub const PLANNER_SYSTEM: &str = "You plan tool calls for an oracle bone research assistant. Reply with JSON only: {\"groups\": [[{\"call_id\": \"c1\", \"tool\": \"...\", \"args\": {...}}]]}. Calls in one group run in parallel. To pass an earlier result, use {\"$from\": \"<call_id>\", \"path\": \"<json pointer>\"}. Images are referred to by handle.";

pub fn planner_request(prompt: &AssembledPrompt, goal: &Goal) -> ChatRequest {
    let tools = serde_json::to_string(&catalog()).expect("catalog serialises");
    ChatRequest::new(
        Some(PLANNER_SYSTEM),
        format!(
            "Tools: {tools}\n\nIntent: {}\nHandles: {:?}\n\n{}",
            goal.intent.as_str(),
            goal.handles,
            prompt.render()
        ),
    )
}

#[derive(Deserialize)]
struct LlmPlan {
    groups: Vec<Vec<PlannedCall>>,
}

fn parse_llm_plan(text: &str) -> std::result::Result<Plan, Vec<String>> {
    let (Some(start), Some(end)) = (text.find('{'), text.rfind('}')) else {
        return Err(vec!["reply contains no JSON object".into()]);
    };
    let parsed: LlmPlan = serde_json::from_str(&text[start..=end]).map_err(|e| vec![format!("reply is not a plan: {e}")])?;
    let plan = Plan {
        source: PlanSource::Llm { repaired: false },
        groups: parsed.groups,
        note: None,
    };
    validate_plan(&plan, &catalog())?;
    Ok(plan)
}

/// Asks the model for a plan, with one repair round.
pub fn plan_llm(llm: &dyn LlmClient, prompt: &AssembledPrompt, goal: &Goal) -> Result<Plan> {
    let request = planner_request(prompt, goal);
    let first = llm.complete(&request)?;
    let problems = match parse_llm_plan(&first.text) {
        Ok(plan) => return Ok(plan),
        Err(p) => p,
    };
    let mut repair = request.clone();
    repair.user = format!(
        "{}\n\nYour previous reply:\n{}\n\nIt was rejected: {}. Reply with a corrected plan.",
        request.user,
        first.text,
        problems.join("; ")
    );
    let second = llm.complete(&repair)?;
    let mut plan = parse_llm_plan(&second.text)
        .map_err(|p| Error::Planning(format!("plan invalid after repair: {}", p.join("; "))))?;
    plan.source = PlanSource::Llm { repaired: true };
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerMode {
    #[default]
    Rule,
    Llm,
}

/// Plans with the configured backend. The LLM path falls back to the rule
/// planner on any failure, recording why in `note`.
pub fn plan(
    mode: PlannerMode,
    llm: &dyn LlmClient,
    goal: &Goal,
    inputs: &PlanInputs,
    prompt: &AssembledPrompt,
) -> Result<Plan> {
    if mode == PlannerMode::Llm {
        match plan_llm(llm, prompt, goal) {
            Ok(p) => return Ok(p),
            Err(e) => {
                let mut p = plan_rule(goal, inputs)?;
                p.note = Some(format!("llm planner fell back to rules: {e}"));
                return Ok(p);
            }
        }
    }
    plan_rule(goal, inputs)
}

/// Every template, checked for internal consistency.
pub fn template_table_problems() -> BTreeMap<&'static str, Vec<String>> {
    let tools = catalog();
    let mut out = BTreeMap::new();
    let inputs = PlanInputs {
        query: "q".into(),
        focus: Some(("t1-in-0".into(), Some(Modality::WholeRubbing))),
    };
    for t in templates() {
        if let Err(p) = validate_plan(&instantiate(&t, &inputs, 0.0), &tools) {
            out.insert(t.id, p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal(intent: Intent) -> Goal {
        Goal {
            intent,
            query: "q".into(),
            handles: vec!["t1-in-0".into()],
        }
    }

    fn with(m: Modality) -> PlanInputs {
        PlanInputs {
            query: "q".into(),
            focus: Some(("t1-in-0".into(), Some(m))),
        }
    }

    #[test]
    fn template_table_is_valid() {
        assert!(template_table_problems().is_empty(), "{:?}", template_table_problems());
        let ids: BTreeSet<&str> = templates().iter().map(|t| t.id).collect();
        assert_eq!(ids.len(), templates().len());
    }

    #[test]
    fn analyze_plan_shape() {
        let p = plan_rule(&goal(Intent::AnalyzeRubbing), &with(Modality::WholeRubbing)).unwrap();
        let tools: Vec<Vec<&str>> = p.groups.iter().map(|g| g.iter().map(|c| c.tool.as_str()).collect()).collect();
        assert_eq!(
            tools,
            vec![
                vec!["classify_modality"],
                vec!["detect_characters"],
                vec!["retrieve_rubbings"],
                vec!["retrieve_texts", "interpret_fragment"],
            ]
        );
        assert_eq!(p.edges(), vec![("c3".to_string(), "c4".to_string()), ("c3".into(), "c5".into())]);
    }

    #[test]
    fn identify_crop_plan_shape() {
        let p = plan_rule(&goal(Intent::IdentifyCharacter), &with(Modality::SingleRubbing)).unwrap();
        let tools: Vec<&str> = p.calls().map(|c| c.tool.as_str()).collect();
        assert_eq!(tools, ["denoise_character", "retrieve_glyphs", "lookup_dictionary"]);
    }

    #[test]
    fn no_applicable_template_is_planning_error() {
        let inputs = PlanInputs { query: "q".into(), focus: None };
        let err = plan_rule(&goal(Intent::AnalyzeRubbing), &inputs).unwrap_err();
        assert_eq!(err.code(), "planning_failed");
        let empty = Goal { intent: Intent::Freeform, query: " ".into(), handles: vec![] };
        assert_eq!(plan_rule(&empty, &inputs).unwrap_err().code(), "invalid_argument");
    }

    #[test]
    fn forward_and_same_group_references_rejected() {
        let mut p = plan_rule(&goal(Intent::AnalyzeRubbing), &with(Modality::WholeRubbing)).unwrap();
        p.groups[0][0].args.insert("image".into(), from_ref("c2", "/x"));
        assert!(validate_plan(&p, &catalog()).is_err());
        let mut q = plan_rule(&goal(Intent::AnalyzeRubbing), &with(Modality::WholeRubbing)).unwrap();
        q.groups[3][1].args.insert("fragment_id".into(), from_ref("c4", "/x"));
        assert!(validate_plan(&q, &catalog()).is_err());
    }
}
