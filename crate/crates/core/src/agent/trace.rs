use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Outcome of one planned call. `Skipped` means a call it depends on did
/// not succeed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallOutcome {
    Ok,
    Error,
    Skipped,
}

/// One tool call as it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub turn: u64,
    /// Index of the plan group, from 0.
    pub group: usize,
    pub call_id: String,
    pub tool: String,
    /// Arguments after reference resolution (images as handles).
    pub args: Map<String, Value>,
    pub status: CallOutcome,
    pub data: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Handles of images this call produced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    /// Unix milliseconds at dispatch.
    pub started_ms: u64,
    pub elapsed_ms: u64,
}

/// JSON of a trace with the timing fields removed; equal session inputs
/// give equal output.
pub fn canonical_trace(events: &[TraceEvent]) -> String {
    let stripped: Vec<Value> = events
        .iter()
        .map(|e| {
            let mut v = serde_json::to_value(e).expect("trace serialises");
            if let Value::Object(m) = &mut v {
                m.remove("started_ms");
                m.remove("elapsed_ms");
            }
            v
        })
        .collect();
    serde_json::to_string(&stripped).expect("trace serialises")
}

pub(crate) fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
