//! Perception (image classification, encoding, intent) and prompt assembly.
//!
//! Intent rules, first match wins; a keyword matches any word it prefixes,
//! multi-word keywords match the phrase:
//!
//! | intent               | keywords |
//! |----------------------|----------|
//! | `generate-facsimile` | facsimile, transform, convert |
//! | `lookup-literature`  | catalog, literature, document, dictionary, record, scholar, reference |
//! | `find-occurrences`   | occurrence, appear, find all, where else |
//! | `identify-character` | identify, what character, which character, classify, recogni |
//! | `analyze-rubbing`    | analy, read, interpret, transcri, inscription |
//! | `freeform`           | anything else |

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::memory::SessionState;
use crate::error::{Error, Result};
use crate::imgproc::binarize;
use crate::raster::RasterImage;
use crate::vision::{whole_image_descriptor, Modality, VisionTools};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intent {
    AnalyzeRubbing,
    IdentifyCharacter,
    FindOccurrences,
    GenerateFacsimile,
    LookupLiterature,
    Freeform,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::AnalyzeRubbing => "analyze-rubbing",
            Intent::IdentifyCharacter => "identify-character",
            Intent::FindOccurrences => "find-occurrences",
            Intent::GenerateFacsimile => "generate-facsimile",
            Intent::LookupLiterature => "lookup-literature",
            Intent::Freeform => "freeform",
        }
    }
}

pub const INTENT_RULES: &[(Intent, &[&str])] = &[
    (Intent::GenerateFacsimile, &["facsimile", "transform", "convert"]),
    (
        Intent::LookupLiterature,
        &["catalog", "literature", "document", "dictionary", "record", "scholar", "reference"],
    ),
    (Intent::FindOccurrences, &["occurrence", "appear", "find all", "where else"]),
    (
        Intent::IdentifyCharacter,
        &["identify", "what character", "which character", "classify", "recogni"],
    ),
    (Intent::AnalyzeRubbing, &["analy", "read", "interpret", "transcri", "inscription"]),
];

fn words(query: &str) -> Vec<String> {
    query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn infer_intent(query: &str) -> Intent {
    let ws = words(query);
    let joined = format!(" {} ", ws.join(" "));
    for (intent, keywords) in INTENT_RULES {
        let hit = keywords.iter().any(|k| {
            if k.contains(' ') {
                joined.contains(&format!(" {k}"))
            } else {
                ws.iter().any(|w| w.starts_with(k))
            }
        });
        if hit {
            return *intent;
        }
    }
    Intent::Freeform
}

/// An uploaded image as received.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageInput {
    Raster(RasterImage),
    Png(Vec<u8>),
    Base64(String),
}

impl ImageInput {
    pub fn decode(&self) -> Result<RasterImage> {
        match self {
            ImageInput::Raster(r) => Ok(r.clone()),
            ImageInput::Png(bytes) => RasterImage::from_png(bytes),
            ImageInput::Base64(s) => RasterImage::from_base64_png(s),
        }
    }
}

/// What the user sent for one turn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurnInput {
    pub query: String,
    pub images: Vec<ImageInput>,
    /// Explicit handles of earlier artifacts.
    pub refs: Vec<String>,
}

impl TurnInput {
    pub fn text(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            ..Self::default()
        }
    }

    pub fn with_image(mut self, image: ImageInput) -> Self {
        self.images.push(image);
        self
    }

    pub fn with_ref(mut self, handle: impl Into<String>) -> Self {
        self.refs.push(handle.into());
        self
    }
}

/// Coarse statistics standing in for visual tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSummary {
    pub ink_fraction: f64,
    /// Orientation bin with the most gradient mass.
    pub dominant_orientation: usize,
    /// Three densest grid cells, densest first.
    pub densest_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceivedImage {
    pub index: usize,
    pub handle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<DescriptorSummary>,
    /// Set when the image could not be decoded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub image: Option<RasterImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencedArtifact {
    pub handle: String,
    pub turn: u64,
    pub origin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    pub is_image: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub intent: Intent,
    pub query: String,
    /// Decoded input handles, then referenced handles.
    pub handles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionResult {
    pub turn: u64,
    pub images: Vec<PerceivedImage>,
    pub referenced: Vec<ReferencedArtifact>,
    pub goal: Goal,
}

impl PerceptionResult {
    /// Image the plan operates on: the first decoded upload, else the first
    /// referenced image artifact.
    pub fn focus(&self) -> Option<(String, Option<Modality>)> {
        self.images
            .iter()
            .find(|i| i.error.is_none())
            .map(|i| (i.handle.clone(), i.modality))
            .or_else(|| {
                self.referenced
                    .iter()
                    .find(|r| r.is_image)
                    .map(|r| (r.handle.clone(), r.modality))
            })
    }
}

pub fn input_handle(turn: u64, index: usize) -> String {
    format!("t{turn}-in-{index}")
}

fn summarize(image: &RasterImage) -> DescriptorSummary {
    let d = whole_image_descriptor(image);
    let ink = binarize(image).count() as f64 / image.len().max(1) as f64;
    let argmax = |xs: &[f32]| {
        xs.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i)
    };
    let mut cells: Vec<(usize, f32)> = d.density_block().iter().copied().enumerate().collect();
    cells.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    DescriptorSummary {
        ink_fraction: ink,
        dominant_orientation: argmax(d.orientation_block()),
        densest_cells: cells.into_iter().take(3).map(|(i, _)| i).collect(),
    }
}

static HANDLE: OnceLock<Regex> = OnceLock::new();
static NTH_CHARACTER: OnceLock<Regex> = OnceLock::new();
static DEICTIC: OnceLock<Regex> = OnceLock::new();

/// Earlier artifacts a turn refers to: explicit `refs` (which must exist),
/// handles written in the query, then, with no upload and no explicit
/// handle, "character N" or "this/that/the character" resolve to the Nth
/// (or first) crop of the latest turn that produced crops.
pub fn resolve_references(query: &str, input: &TurnInput, state: &SessionState) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    let push = |h: String, out: &mut Vec<String>| {
        if !out.contains(&h) {
            out.push(h);
        }
    };
    for r in &input.refs {
        if !state.artifacts.contains(r) {
            return Err(Error::not_found("artifact", r.as_str()));
        }
        push(r.clone(), &mut out);
    }
    let handle_re = HANDLE.get_or_init(|| Regex::new(r"\bt\d+-[A-Za-z0-9-]+\b").expect("static pattern"));
    for m in handle_re.find_iter(query) {
        if state.artifacts.contains(m.as_str()) {
            push(m.as_str().to_string(), &mut out);
        }
    }
    if out.is_empty() && input.images.is_empty() {
        let crops: Vec<&str> = state
            .history
            .iter()
            .rev()
            .map(|t| {
                state
                    .artifacts
                    .iter()
                    .filter(|a| a.turn == t.turn && a.origin == "detect_characters" && a.image().is_some())
                    .map(|a| a.handle.as_str())
                    .collect::<Vec<_>>()
            })
            .find(|c| !c.is_empty())
            .unwrap_or_default();
        let nth = NTH_CHARACTER.get_or_init(|| Regex::new(r"(?i)\bcharacter\s*#?\s*(\d+)\b").expect("static pattern"));
        let deictic = DEICTIC.get_or_init(|| {
            Regex::new(r"(?i)\b(this|that|the|same)\s+(character|glyph|crop)\b").expect("static pattern")
        });
        if let Some(c) = nth.captures(query) {
            let n: usize = c[1].parse().unwrap_or(0);
            if n >= 1 && n <= crops.len() {
                push(crops[n - 1].to_string(), &mut out);
            }
        } else if deictic.is_match(query) {
            if let Some(first) = crops.first() {
                push(first.to_string(), &mut out);
            }
        }
    }
    Ok(out)
}

/// Decodes, classifies and encodes every upload, resolves references and
/// infers the intent. An empty query with no images is an argument error;
/// an undecodable image only marks its own entry.
pub fn perceive(input: &TurnInput, state: &SessionState, vision: &VisionTools) -> Result<PerceptionResult> {
    if input.query.trim().is_empty() && input.images.is_empty() {
        return Err(Error::argument("query: empty input needs text or at least one image"));
    }
    let turn = state.turn + 1;
    let images: Vec<PerceivedImage> = input
        .images
        .iter()
        .enumerate()
        .map(|(index, raw)| {
            let handle = input_handle(turn, index);
            match raw.decode() {
                Ok(img) => {
                    let (modality, confidence) = vision.classify_modality(&img);
                    PerceivedImage {
                        index,
                        handle,
                        modality: Some(modality),
                        confidence: Some(confidence),
                        width: Some(img.width()),
                        height: Some(img.height()),
                        descriptor: Some(summarize(&img)),
                        error: None,
                        image: Some(img),
                    }
                }
                Err(e) => PerceivedImage {
                    index,
                    handle,
                    modality: None,
                    confidence: None,
                    width: None,
                    height: None,
                    descriptor: None,
                    error: Some(e.to_string()),
                    image: None,
                },
            }
        })
        .collect();
    let referenced: Vec<ReferencedArtifact> = resolve_references(&input.query, input, state)?
        .into_iter()
        .map(|h| {
            let a = state.artifacts.get(&h).expect("resolved handles exist");
            let modality = a
                .modality()
                .or_else(|| a.image().map(|img| vision.classify_modality(img).0));
            ReferencedArtifact {
                handle: h,
                turn: a.turn,
                origin: a.origin.clone(),
                modality,
                is_image: a.image().is_some(),
            }
        })
        .collect();
    let handles = images
        .iter()
        .filter(|i| i.error.is_none())
        .map(|i| i.handle.clone())
        .chain(referenced.iter().map(|r| r.handle.clone()))
        .collect();
    Ok(PerceptionResult {
        turn,
        goal: Goal {
            intent: infer_intent(&input.query),
            query: input.query.clone(),
            handles,
        },
        images,
        referenced,
    })
}

pub const PREAMBLE: &str = "You are a research assistant for oracle bone script. Answer using the tool results; cite artifact handles and fragment ids.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBlock {
    pub handle: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub preamble: String,
    /// The user query, verbatim.
    pub query: String,
    /// One block per uploaded image, in input order.
    pub evidence: Vec<EvidenceBlock>,
}

impl AssembledPrompt {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n\nQuery: {}", self.preamble, self.query);
        for block in &self.evidence {
            out.push_str("\n\n");
            out.push_str(&block.text);
        }
        out
    }
}

fn modality_label(m: Option<Modality>) -> String {
    m.map_or_else(|| "unknown modality".into(), |m| m.as_str().to_string())
}

/// Preamble (plus summaries of referenced artifacts), the query, and one
/// evidence block per uploaded image.
pub fn assemble_prompt(query: &str, perception: &PerceptionResult, state: &SessionState) -> AssembledPrompt {
    let mut preamble = PREAMBLE.to_string();
    if !perception.referenced.is_empty() {
        preamble.push_str("\nReferenced artifacts from earlier turns:");
        for r in &perception.referenced {
            let kind = if r.is_image {
                format!("{} image", modality_label(r.modality))
            } else {
                "tool result".to_string()
            };
            let size = state
                .artifacts
                .get(&r.handle)
                .and_then(|a| a.image())
                .map(|i| format!(", {}x{} px", i.width(), i.height()))
                .unwrap_or_default();
            preamble.push_str(&format!(
                "\n- {}: {kind} from {} in turn {}{size}",
                r.handle, r.origin, r.turn
            ));
        }
    }
    let evidence = perception
        .images
        .iter()
        .map(|img| {
            let text = match (&img.error, &img.descriptor) {
                (Some(e), _) => format!("[image {} | {}] could not be decoded: {e}", img.index + 1, img.handle),
                (None, Some(d)) => format!(
                    "[image {} | {}] {} (confidence {:.2}), {}x{} px, ink {:.1}%, dominant orientation bin {}, densest cells {:?}",
                    img.index + 1,
                    img.handle,
                    modality_label(img.modality),
                    img.confidence.unwrap_or(0.0),
                    img.width.unwrap_or(0),
                    img.height.unwrap_or(0),
                    d.ink_fraction * 100.0,
                    d.dominant_orientation,
                    d.densest_cells
                ),
                (None, None) => format!("[image {} | {}]", img.index + 1, img.handle),
            };
            EvidenceBlock {
                handle: img.handle.clone(),
                text,
            }
        })
        .collect();
    AssembledPrompt {
        preamble,
        query: query.to_string(),
        evidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intent_rules() {
        assert_eq!(infer_intent("what catalogues record this character"), Intent::LookupLiterature);
        assert_eq!(infer_intent("Please analyze this rubbing."), Intent::AnalyzeRubbing);
        assert_eq!(infer_intent("What character is this?"), Intent::IdentifyCharacter);
        assert_eq!(infer_intent("Where else does it appear?"), Intent::FindOccurrences);
        assert_eq!(infer_intent("Turn this into a facsimile"), Intent::GenerateFacsimile);
        assert_eq!(infer_intent("hello"), Intent::Freeform);
        // "read" is a word prefix, not a substring.
        assert_eq!(infer_intent("already done"), Intent::Freeform);
    }

    #[test]
    fn empty_input_rejected() {
        let err = perceive(&TurnInput::text("  "), &SessionState::new("s"), &VisionTools::new()).unwrap_err();
        assert_eq!(err.code(), "invalid_argument");
    }

    #[test]
    fn text_only_has_no_handles() {
        let p = perceive(
            &TurnInput::text("what catalogues record this character"),
            &SessionState::new("s"),
            &VisionTools::new(),
        )
        .unwrap();
        assert_eq!(p.goal.intent, Intent::LookupLiterature);
        assert!(p.goal.handles.is_empty());
        let prompt = assemble_prompt(&p.goal.query, &p, &SessionState::new("s"));
        assert!(prompt.evidence.is_empty());
        assert_eq!(prompt.render(), format!("{PREAMBLE}\n\nQuery: what catalogues record this character"));
    }

    #[test]
    fn bad_image_gets_its_own_error_entry() {
        let input = TurnInput::text("look")
            .with_image(ImageInput::Base64("not base64!".into()))
            .with_image(ImageInput::Raster(RasterImage::filled(16, 16, 255)));
        let p = perceive(&input, &SessionState::new("s"), &VisionTools::new()).unwrap();
        assert!(p.images[0].error.is_some());
        assert!(p.images[1].error.is_none());
        assert_eq!(p.goal.handles, vec!["t1-in-1".to_string()]);
        let prompt = assemble_prompt("look", &p, &SessionState::new("s"));
        assert_eq!(prompt.evidence.len(), 2);
        assert_eq!(prompt.evidence[0].handle, "t1-in-0");
    }
}
