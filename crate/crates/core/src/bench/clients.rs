//! Reference model clients: an oracle that reads the ground truth, a
//! fixture-driven scripted client, a remote chat model and a baseline built
//! from the deterministic tools.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::questions::{QType, QuestionInstance, QuestionSet, Task, Truth};
use super::runner::{ModelClient, ModelOutput};
use crate::agent::llm::{ChatRequest, LlmClient};
use crate::error::{Error, Result};
use crate::kb::KbSnapshot;
use crate::vision::{glyph_descriptor, VisionTools, VisualDescriptor};

/// Chat prompt for a question: system text, template and images in
/// placeholder order.
pub fn chat_request(q: &QuestionInstance, set: &QuestionSet) -> Result<ChatRequest> {
    Ok(ChatRequest {
        system: (!q.system.is_empty()).then(|| q.system.clone()),
        user: q.prompt.clone(),
        images: q
            .images
            .iter()
            .map(|k| set.image(k).cloned())
            .collect::<Result<_>>()?,
    })
}

/// Answers every question from its ground truth.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleClient;

impl ModelClient for OracleClient {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn ask(&self, q: &QuestionInstance, set: &QuestionSet) -> Result<ModelOutput> {
        let text = match (&q.truth, q.qtype) {
            (Truth::SameClass { same }, QType::How) => if *same { "100" } else { "0" }.to_string(),
            (Truth::SameClass { same }, _) => if *same { "Yes" } else { "No" }.to_string(),
            (Truth::Modality { modality }, _) => format!("{}.", modality.option_letter()),
            (Truth::Count { count }, _) => count.to_string(),
            (Truth::Boxes { boxes }, _) => format_boxes(boxes),
            (Truth::Image { image }, _) => return Ok(ModelOutput::Image(set.image(image)?.clone())),
            (Truth::Occurrences { instances, .. }, _) => serde_json::to_string(instances)?,
        };
        Ok(ModelOutput::Text(text))
    }
}

fn format_boxes(boxes: &[[u32; 4]]) -> String {
    if boxes.is_empty() {
        return "[]".into();
    }
    boxes
        .iter()
        .map(|b| format!("[{}, {}, {}, {}]", b[0], b[1], b[2], b[3]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replies from a fingerprint-keyed fixture table; a miss is a transport
/// error. Counts every call.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: BTreeMap<String, String>,
    fallback: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(replies: BTreeMap<String, String>) -> Self {
        Self {
            replies,
            ..Self::default()
        }
    }

    /// Same reply to every question.
    pub fn constant(reply: impl Into<String>) -> Self {
        Self {
            fallback: Some(reply.into()),
            ..Self::default()
        }
    }

    /// Fixture table recording the oracle's answers for `set`, keyed by
    /// prompt fingerprint. Image answers are skipped.
    pub fn record_oracle(set: &QuestionSet) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for q in &set.questions {
            if let ModelOutput::Text(t) = OracleClient.ask(q, set)? {
                out.insert(chat_request(q, set)?.fingerprint(), t);
            }
        }
        Ok(out)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ModelClient for ScriptedClient {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn ask(&self, q: &QuestionInstance, set: &QuestionSet) -> Result<ModelOutput> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let fp = chat_request(q, set)?.fingerprint();
        self.replies
            .get(&fp)
            .or(self.fallback.as_ref())
            .map(|t| ModelOutput::Text(t.clone()))
            .ok_or_else(|| Error::External(format!("no scripted reply for {}", q.qid)))
    }
}

/// Asks a chat model. Generation questions get text back and so score as
/// invalid unless the model is wrapped by something that returns images.
pub struct LlmModelClient {
    name: String,
    llm: Arc<dyn LlmClient>,
}

impl LlmModelClient {
    pub fn new(name: impl Into<String>, llm: Arc<dyn LlmClient>) -> Self {
        Self {
            name: name.into(),
            llm,
        }
    }
}

impl ModelClient for LlmModelClient {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn ask(&self, q: &QuestionInstance, set: &QuestionSet) -> Result<ModelOutput> {
        let completion = self
            .llm
            .complete(&chat_request(q, set)?)
            .map_err(|e| Error::External(e.to_string()))?;
        Ok(ModelOutput::Text(completion.text))
    }
}

/// Cosine at or above which two glyph descriptors are called the same class.
pub const SAME_CLASS_COSINE: f32 = 0.76;

/// Baseline answering with the built-in vision tools.
pub struct ToolsClient {
    kb: KbSnapshot,
    tools: VisionTools,
    descriptors: Mutex<HashMap<String, VisualDescriptor>>,
}

impl ToolsClient {
    pub fn new(kb: KbSnapshot, tools: VisionTools) -> Self {
        Self {
            kb,
            tools,
            descriptors: Mutex::new(HashMap::new()),
        }
    }

    fn descriptor(&self, set: &QuestionSet, key: &str) -> Result<VisualDescriptor> {
        if let Some(d) = self.descriptors.lock().expect("cache lock").get(key) {
            return Ok(d.clone());
        }
        let d = glyph_descriptor(set.image(key)?);
        self.descriptors
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), d.clone());
        Ok(d)
    }

    fn first_image<'a>(&self, q: &QuestionInstance, set: &'a QuestionSet) -> Result<&'a crate::raster::RasterImage> {
        let key = q
            .images
            .first()
            .ok_or_else(|| Error::argument(format!("question {} has no image", q.qid)))?;
        set.image(key)
    }
}

impl ModelClient for ToolsClient {
    fn name(&self) -> String {
        "tools".into()
    }

    fn ask(&self, q: &QuestionInstance, set: &QuestionSet) -> Result<ModelOutput> {
        let text = match q.qtype {
            QType::How if q.task == Task::Detection => {
                self.tools.detect_characters(self.first_image(q, set)?).len().to_string()
            }
            QType::YesNo | QType::How => {
                let [a, b] = q.images.as_slice() else {
                    return Err(Error::argument(format!("pair question {} needs two images", q.qid)));
                };
                let cos = self.descriptor(set, a)?.cosine(&self.descriptor(set, b)?);
                if q.qtype == QType::How {
                    ((cos.max(0.0) * 100.0).round() as i64).to_string()
                } else if cos >= SAME_CLASS_COSINE {
                    "Yes".into()
                } else {
                    "No".into()
                }
            }
            QType::Which => {
                let (m, _) = self.tools.classify_modality(self.first_image(q, set)?);
                format!("{}.", m.option_letter())
            }
            QType::Where => {
                let dets = self.tools.detect_characters(self.first_image(q, set)?);
                let boxes: Vec<[u32; 4]> = dets.iter().map(|d| d.bbox.to_array()).collect();
                format_boxes(&boxes)
            }
            QType::Generate => {
                return Ok(ModelOutput::Image(self.tools.generate_facsimile(self.first_image(q, set)?)))
            }
            QType::List => {
                let d = self.descriptor(set, &q.images[0])?;
                let index = self.kb.instance_index();
                let hits = index.search(&d, index.len().max(1))?;
                let fragments: Vec<String> = hits
                    .iter()
                    .filter(|h| h.score >= SAME_CLASS_COSINE as f64)
                    .filter_map(|h| self.kb.character(&h.target_id))
                    .map(|c| c.fragment_id.to_string())
                    .collect();
                serde_json::to_string(&fragments)?
            }
        };
        Ok(ModelOutput::Text(text))
    }
}
