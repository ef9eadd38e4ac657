//! Language-model backends: a remote chat-completion client, a scripted
//! fixture client for tests, and an always-unavailable client.
//!
//! Configured from `SCRIPTORIUM_LLM_MODE` (`remote`, `scripted`, `off`),
//! `SCRIPTORIUM_LLM_URL`, `SCRIPTORIUM_LLM_KEY`, `SCRIPTORIUM_LLM_MODEL` and
//! `SCRIPTORIUM_LLM_FIXTURES` (a JSON object mapping prompt fingerprints to
//! completions).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// A single-turn chat prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatRequest {
    pub system: Option<String>,
    pub user: String,
    pub images: Vec<RasterImage>,
}

impl ChatRequest {
    pub fn new(system: Option<&str>, user: impl Into<String>) -> Self {
        Self {
            system: system.map(str::to_string),
            user: user.into(),
            images: Vec::new(),
        }
    }

    /// SHA-256 over the canonical JSON
    /// `{"images":[<sha256 of w,h,pixels>...],"system":..,"user":..}`.
    pub fn fingerprint(&self) -> String {
        let images: Vec<String> = self
            .images
            .iter()
            .map(|img| {
                let mut h = Sha256::new();
                h.update(img.width().to_le_bytes());
                h.update(img.height().to_le_bytes());
                h.update(img.pixels());
                hex::encode(h.finalize())
            })
            .collect();
        let canonical = json!({ "images": images, "system": self.system, "user": self.user });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Attempts spent, including the successful one.
    pub attempts: u32,
    /// Messages of the failed attempts, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    Remote,
    Scripted,
    Off,
}

impl LlmMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "remote" => Ok(LlmMode::Remote),
            "scripted" => Ok(LlmMode::Scripted),
            "off" | "" => Ok(LlmMode::Off),
            other => Err(Error::argument(format!("unknown LLM mode {other:?}"))),
        }
    }
}

/// Fixture-backed client. A fingerprint miss is `LlmUnavailable`.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    fixtures: RwLock<BTreeMap<String, String>>,
}

impl ScriptedLlm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(fixtures: BTreeMap<String, String>) -> Self {
        Self {
            fixtures: RwLock::new(fixtures),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_map(serde_json::from_str(&text)?))
    }

    pub fn insert(&self, request: &ChatRequest, text: impl Into<String>) {
        self.fixtures
            .write()
            .expect("fixture lock")
            .insert(request.fingerprint(), text.into());
    }

    pub fn len(&self) -> usize {
        self.fixtures.read().expect("fixture lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, request: &ChatRequest) -> Result<Completion> {
        let fp = request.fingerprint();
        match self.fixtures.read().expect("fixture lock").get(&fp) {
            Some(text) => Ok(Completion {
                text: text.clone(),
                attempts: 1,
                failures: Vec::new(),
            }),
            None => Err(Error::LlmUnavailable(format!("no scripted completion for {fp}"))),
        }
    }
}

/// Always unavailable; callers fall back to their deterministic path.
#[derive(Debug, Default, Clone, Copy)]
pub struct OffLlm;

impl LlmClient for OffLlm {
    fn complete(&self, _: &ChatRequest) -> Result<Completion> {
        Err(Error::LlmUnavailable("LLM mode is off".into()))
    }
}

/// Attempts per remote completion before giving up.
pub const REMOTE_ATTEMPTS: u32 = 3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// OpenAI-style `chat/completions` client. Images travel as PNG data URLs.
pub struct RemoteLlm {
    url: String,
    key: Option<String>,
    model: String,
    agent: ureq::Agent,
    attempts: u32,
}

impl RemoteLlm {
    pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            key,
            model: model.into(),
            agent,
            attempts: REMOTE_ATTEMPTS,
        }
    }

    /// Overrides the number of attempts (at least one).
    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    pub fn body(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({ "role": "system", "content": system }));
        }
        let mut content = vec![json!({ "type": "text", "text": request.user })];
        for img in &request.images {
            content.push(json!({
                "type": "image_url",
                "image_url": { "url": format!("data:image/png;base64,{}", img.to_base64_png()) }
            }));
        }
        messages.push(json!({ "role": "user", "content": content }));
        json!({ "model": self.model, "messages": messages, "temperature": 0 })
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(format!("HTTP {status}"));
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| format!("bad body: {e}"))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl LlmClient for RemoteLlm {
    fn complete(&self, request: &ChatRequest) -> Result<Completion> {
        let body = self.body(request);
        let mut failures = Vec::new();
        for n in 1..=self.attempts {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        attempts: n,
                        failures,
                    })
                }
                Err(e) => failures.push(e),
            }
        }
        Err(Error::LlmUnavailable(format!(
            "{} attempts failed: {}",
            self.attempts,
            failures.join("; ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmConfig {
    pub mode: LlmMode,
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: String,
    pub fixtures: Option<PathBuf>,
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            mode: LlmMode::Off,
            url: None,
            key: None,
            model: "default".into(),
            fixtures: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl LlmConfig {
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        Ok(Self {
            mode: var("SCRIPTORIUM_LLM_MODE")
                .map(|m| LlmMode::parse(&m))
                .transpose()?
                .unwrap_or(LlmMode::Off),
            url: var("SCRIPTORIUM_LLM_URL"),
            key: var("SCRIPTORIUM_LLM_KEY"),
            model: var("SCRIPTORIUM_LLM_MODEL").unwrap_or_else(|| "default".into()),
            fixtures: var("SCRIPTORIUM_LLM_FIXTURES").map(PathBuf::from),
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn build(&self) -> Result<Arc<dyn LlmClient>> {
        Ok(match self.mode {
            LlmMode::Off => Arc::new(OffLlm),
            LlmMode::Scripted => match &self.fixtures {
                Some(path) => Arc::new(ScriptedLlm::from_file(path)?),
                None => Arc::new(ScriptedLlm::new()),
            },
            LlmMode::Remote => {
                let url = self
                    .url
                    .clone()
                    .ok_or_else(|| Error::argument("remote LLM mode needs SCRIPTORIUM_LLM_URL"))?;
                Arc::new(RemoteLlm::new(url, self.key.clone(), self.model.clone(), self.timeout))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_hit_and_miss() {
        let llm = ScriptedLlm::new();
        let req = ChatRequest::new(Some("sys"), "hello");
        llm.insert(&req, "canned");
        assert_eq!(llm.complete(&req).unwrap().text, "canned");
        let miss = ChatRequest::new(Some("sys"), "hello!");
        assert!(matches!(llm.complete(&miss), Err(Error::LlmUnavailable(_))));
    }

    #[test]
    fn fingerprint_covers_images() {
        let mut a = ChatRequest::new(None, "q");
        let b = a.clone();
        a.images.push(RasterImage::filled(2, 2, 0));
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(b.fingerprint(), ChatRequest::new(None, "q").fingerprint());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(LlmMode::parse("Remote").unwrap(), LlmMode::Remote);
        assert_eq!(LlmMode::parse("").unwrap(), LlmMode::Off);
        assert!(LlmMode::parse("local").is_err());
    }
}
