//! Hook for replacing a built-in vision pipeline with an external model
//! (a trained detector, an image-to-image translator, ...). Requests and
//! responses travel in the tool-call wire format with PNG images as base64.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Map, Value};

use super::detect::Detection;
use crate::error::{Error, Result};
use crate::raster::{BoundingBox, RasterImage};
use crate::wire::{ToolRequest, ToolResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRequest {
    pub tool: String,
    pub instruction: String,
    pub images: Vec<RasterImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExternalResponse {
    Image(RasterImage),
    Detections(Vec<Detection>),
    Label { label: String, confidence: f64 },
}

pub trait ExternalModelClient: Send + Sync {
    fn invoke(&self, request: &ExternalRequest) -> Result<ExternalResponse>;
}

impl ExternalRequest {
    pub fn to_wire(&self, call_id: impl Into<String>) -> ToolRequest {
        let images: Vec<Value> = self
            .images
            .iter()
            .map(|img| json!({ "png_base64": img.to_base64_png() }))
            .collect();
        let mut args = Map::new();
        args.insert("instruction".into(), Value::String(self.instruction.clone()));
        args.insert("images".into(), Value::Array(images));
        ToolRequest {
            tool: self.tool.clone(),
            args,
            call_id: call_id.into(),
        }
    }
}

impl ExternalResponse {
    /// Interprets the `data` object of a successful wire response. Accepts
    /// `{"image": {"png_base64": ..}}`, `{"detections": [{"bbox": [..], "score": ..}]}`
    /// or `{"label": .., "confidence": ..}`.
    pub fn from_wire(resp: &ToolResponse) -> Result<Self> {
        if !resp.is_ok() {
            return Err(Error::External(
                resp.error.clone().unwrap_or_else(|| "external call failed".into()),
            ));
        }
        let data = &resp.data;
        if let Some(img) = data.get("image") {
            let b64 = img
                .get("png_base64")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::External("image.png_base64 missing".into()))?;
            return Ok(ExternalResponse::Image(RasterImage::from_base64_png(b64)?));
        }
        if let Some(dets) = data.get("detections").and_then(Value::as_array) {
            let mut out = Vec::with_capacity(dets.len());
            for d in dets {
                let coords: Vec<u32> = d
                    .get("bbox")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(|v| v.as_u64().map(|x| x as u32)).collect())
                    .unwrap_or_default();
                if coords.len() != 4 {
                    return Err(Error::External("detection bbox needs 4 integers".into()));
                }
                let bbox = BoundingBox::new(coords[0], coords[1], coords[2], coords[3])
                    .map_err(|e| Error::External(e.to_string()))?;
                let score = d.get("score").and_then(Value::as_f64).unwrap_or(1.0).clamp(0.0, 1.0);
                out.push(Detection { bbox, score });
            }
            return Ok(ExternalResponse::Detections(out));
        }
        if let Some(label) = data.get("label").and_then(Value::as_str) {
            let confidence = data
                .get("confidence")
                .and_then(Value::as_f64)
                .unwrap_or(1.0)
                .clamp(0.0, 1.0);
            return Ok(ExternalResponse::Label {
                label: label.to_string(),
                confidence,
            });
        }
        Err(Error::External("response data has no image, detections or label".into()))
    }
}

/// Posts wire requests to `{base_url}/tools/{tool}`.
pub struct HttpModelClient {
    base_url: String,
    agent: ureq::Agent,
    counter: AtomicU64,
}

impl HttpModelClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            counter: AtomicU64::new(0),
        }
    }
}

impl ExternalModelClient for HttpModelClient {
    fn invoke(&self, request: &ExternalRequest) -> Result<ExternalResponse> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let wire = request.to_wire(format!("ext-{n}"));
        let url = format!("{}/tools/{}", self.base_url, request.tool);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&wire)
            .map_err(|e| Error::External(e.to_string()))?;
        let body: ToolResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::External(format!("bad response body: {e}")))?;
        ExternalResponse::from_wire(&body)
    }
}
