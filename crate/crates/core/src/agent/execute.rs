use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::{Map, Value};

use super::memory::{Artifact, ArtifactKind, ArtifactTable};
use super::plan::{arg_ref, validate_plan, Plan, PlannedCall};
use super::tools::{catalog, dispatch, ImageLookup, ImageOutputs, ToolContext};
use super::trace::{now_ms, CallOutcome, TraceEvent};
use crate::error::{Error, Result};
use crate::kb::KbSnapshot;
use crate::raster::RasterImage;
use crate::vision::VisionTools;
use crate::wire::ToolRequest;

/// Result of running a plan: one event per call in plan order, plus the
/// artifacts to record.
#[derive(Debug, Clone, Default)]
pub struct Execution {
    pub events: Vec<TraceEvent>,
    pub artifacts: Vec<Artifact>,
}

impl Execution {
    pub fn event(&self, call_id: &str) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.call_id == call_id)
    }
}

/// Session artifacts plus images produced earlier in the same turn.
struct Overlay<'a> {
    base: &'a ArtifactTable,
    fresh: &'a BTreeMap<String, RasterImage>,
}

impl ImageLookup for Overlay<'_> {
    fn image(&self, handle: &str) -> Option<RasterImage> {
        self.fresh.get(handle).cloned().or_else(|| self.base.image(handle))
    }
}

pub fn result_handle(turn: u64, call_id: &str) -> String {
    format!("t{turn}-{call_id}")
}

enum Prepared {
    Run(ToolRequest),
    Skip(Map<String, Value>, String),
    Fail(Map<String, Value>, String),
}

fn prepare(call: &PlannedCall, done: &BTreeMap<String, TraceEvent>) -> Prepared {
    let mut args = Map::new();
    for (name, v) in &call.args {
        let Some((from, path)) = arg_ref(v) else {
            args.insert(name.clone(), v.clone());
            continue;
        };
        let producer = &done[from];
        if producer.status != CallOutcome::Ok {
            return Prepared::Skip(call.args.clone(), format!("skipped: depends on {from}, which did not succeed"));
        }
        match Value::Object(producer.data.clone()).pointer(path) {
            Some(resolved) => {
                args.insert(name.clone(), resolved.clone());
            }
            None => {
                return Prepared::Fail(
                    call.args.clone(),
                    format!("invalid_argument: args.{name}: {from}{path} is not in the result"),
                )
            }
        }
    }
    Prepared::Run(ToolRequest {
        tool: call.tool.clone(),
        args,
        call_id: call.call_id.clone(),
    })
}

/// Runs groups in order, the calls of a group concurrently. Events come back
/// in plan order whatever the scheduling. A failed call never aborts the
/// plan; its dependents are marked skipped.
pub fn execute_plan(
    kb: &KbSnapshot,
    vision: &VisionTools,
    plan: &Plan,
    artifacts: &ArtifactTable,
    turn: u64,
) -> Result<Execution> {
    validate_plan(plan, &catalog()).map_err(|p| Error::Planning(p.join("; ")))?;
    let mut done: BTreeMap<String, TraceEvent> = BTreeMap::new();
    let mut fresh: BTreeMap<String, RasterImage> = BTreeMap::new();
    let mut out = Execution::default();

    for (g, group) in plan.groups.iter().enumerate() {
        let prepared: Vec<Prepared> = group.iter().map(|c| prepare(c, &done)).collect();
        let lookup = Overlay {
            base: artifacts,
            fresh: &fresh,
        };
        let ctx = ToolContext {
            kb,
            vision,
            artifacts: &lookup,
        };
        let run = |p: &Prepared, call: &PlannedCall| -> (TraceEvent, ImageOutputs) {
            let started_ms = now_ms();
            let clock = Instant::now();
            let mut outputs = ImageOutputs::artifacts(result_handle(turn, &call.call_id));
            let (args, status, data, error) = match p {
                Prepared::Run(req) => {
                    let resp = dispatch(&ctx, req, &mut outputs);
                    let status = if resp.is_ok() { CallOutcome::Ok } else { CallOutcome::Error };
                    (req.args.clone(), status, resp.data, resp.error)
                }
                Prepared::Skip(args, why) => (args.clone(), CallOutcome::Skipped, Map::new(), Some(why.clone())),
                Prepared::Fail(args, why) => (args.clone(), CallOutcome::Error, Map::new(), Some(why.clone())),
            };
            let event = TraceEvent {
                turn,
                group: g,
                call_id: call.call_id.clone(),
                tool: call.tool.clone(),
                args,
                status,
                data,
                error,
                artifacts: outputs.produced.iter().map(|p| p.handle.clone()).collect(),
                started_ms,
                elapsed_ms: clock.elapsed().as_millis() as u64,
            };
            (event, outputs)
        };
        let results: Vec<(TraceEvent, ImageOutputs)> = if group.len() == 1 {
            vec![run(&prepared[0], &group[0])]
        } else {
            let run = &run;
            std::thread::scope(|s| {
                let handles: Vec<_> = prepared
                    .iter()
                    .zip(group)
                    .map(|(p, c)| s.spawn(move || run(p, c)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("tool thread panicked"))
                    .collect()
            })
        };
        for (event, outputs) in results {
            for p in outputs.produced {
                fresh.insert(p.handle.clone(), p.image.clone());
                out.artifacts.push(Artifact {
                    handle: p.handle,
                    turn,
                    origin: event.tool.clone(),
                    kind: ArtifactKind::Image {
                        image: p.image,
                        modality: p.modality,
                    },
                });
            }
            if event.status == CallOutcome::Ok {
                out.artifacts.push(Artifact {
                    handle: result_handle(turn, &event.call_id),
                    turn,
                    origin: event.tool.clone(),
                    kind: ArtifactKind::Result {
                        data: Value::Object(event.data.clone()),
                    },
                });
            }
            done.insert(event.call_id.clone(), event.clone());
            out.events.push(event);
        }
    }
    Ok(out)
}
