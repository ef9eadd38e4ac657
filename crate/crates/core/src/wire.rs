//! Tool-call wire format shared by in-process dispatch, the HTTP service and
//! external model clients.
//!
//! ```json
//! {"tool": "detect_characters", "args": {"image": "art-1"}, "call_id": "c1"}
//! {"call_id": "c1", "status": "ok", "data": {"detections": []}}
//! {"call_id": "c1", "status": "error", "data": {}, "error": "..."}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolRequest {
    pub tool: String,
    pub args: Map<String, Value>,
    pub call_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub call_id: String,
    pub status: CallStatus,
    pub data: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ToolResponse {
    pub fn ok(call_id: impl Into<String>, data: Map<String, Value>) -> Self {
        Self {
            call_id: call_id.into(),
            status: CallStatus::Ok,
            data,
            error: None,
        }
    }

    pub fn error(call_id: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            call_id: call_id.into(),
            status: CallStatus::Error,
            data: Map::new(),
            error: Some(message.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CallStatus::Ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn exact_field_names() {
        let req: ToolRequest =
            serde_json::from_value(json!({"tool": "t", "args": {"k": 3}, "call_id": "c1"})).unwrap();
        assert_eq!(req.args["k"], 3);
        let ok = serde_json::to_value(ToolResponse::ok("c1", Map::new())).unwrap();
        assert_eq!(ok, json!({"call_id": "c1", "status": "ok", "data": {}}));
        let err = serde_json::to_value(ToolResponse::error("c2", "boom")).unwrap();
        assert_eq!(
            err,
            json!({"call_id": "c2", "status": "error", "data": {}, "error": "boom"})
        );
    }

    #[test]
    fn args_must_be_an_object() {
        let bad = serde_json::from_value::<ToolRequest>(json!({"tool": "t", "args": [1], "call_id": "c"}));
        assert!(bad.is_err());
        let extra = serde_json::from_value::<ToolRequest>(
            json!({"tool": "t", "args": {}, "call_id": "c", "x": 1}),
        );
        assert!(extra.is_err());
    }
}
