//! Tool catalog, argument validation and dispatch.
//!
//! Image arguments are either an artifact handle (`"t1-in-0"`) or an inline
//! `{"png_base64": ".."}` object. Images produced by a tool come back the same
//! way: as handles inside a session, inline otherwise.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kb::{FragmentId, GlyphClassId, KbSnapshot};
use crate::raster::RasterImage;
use crate::synth::single_crop_region;
use crate::text::{interpret_fragment, lookup_dictionary, retrieve_texts};
use crate::vision::{classify_glyph, glyph_descriptor, retrieve_rubbings, Modality, VisionTools};
use crate::wire::{ToolRequest, ToolResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamType {
    /// Artifact handle or `{"png_base64": ..}`.
    Image,
    Text,
    PositiveInt,
    FragmentId,
    ClassId,
    /// One of the listed strings.
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    /// Top-level fields of the `data` object on success.
    pub result_fields: Vec<&'static str>,
    pub example_args: Value,
}

fn p(name: &'static str, ty: ParamType, required: bool, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        ty,
        required,
        description,
    }
}

const IMAGE_DOC: &str = "artifact handle or {\"png_base64\": ...}";
pub const GLYPH_INDEXES: &[&str] = &["standard", "instances"];

/// The full catalog, in a fixed order.
pub fn catalog() -> Vec<ToolSpec> {
    use ParamType::*;
    vec![
        ToolSpec {
            name: "classify_modality",
            description: "Classify an image as whole/single rubbing/facsimile.",
            params: vec![p("image", Image, true, IMAGE_DOC)],
            result_fields: vec!["modality", "confidence"],
            example_args: json!({ "image": "t1-in-0" }),
        },
        ToolSpec {
            name: "detect_characters",
            description: "Detect character boxes on a whole image; each box's crop becomes an artifact.",
            params: vec![p("image", Image, true, IMAGE_DOC)],
            result_fields: vec!["count", "detections"],
            example_args: json!({ "image": "t1-in-0" }),
        },
        ToolSpec {
            name: "denoise_character",
            description: "Turn a single-character crop into a clean facsimile-style glyph.",
            params: vec![p("image", Image, true, IMAGE_DOC)],
            result_fields: vec!["image"],
            example_args: json!({ "image": "t1-c2-0" }),
        },
        ToolSpec {
            name: "generate_facsimile",
            description: "Transform a whole rubbing into a facsimile.",
            params: vec![p("image", Image, true, IMAGE_DOC)],
            result_fields: vec!["image"],
            example_args: json!({ "image": "t1-in-0" }),
        },
        ToolSpec {
            name: "retrieve_glyphs",
            description: "Rank standard glyph images (or corpus character instances) by visual similarity.",
            params: vec![
                p("image", Image, true, IMAGE_DOC),
                p("k", PositiveInt, false, "number of hits, default 5"),
                p("index", Choice(GLYPH_INDEXES), false, "standard (default) or instances"),
            ],
            result_fields: vec!["hits"],
            example_args: json!({ "image": "t1-c2-0", "k": 5, "index": "standard" }),
        },
        ToolSpec {
            name: "classify_glyph",
            description: "Vote the glyph class of a single-character image over its nearest standard images.",
            params: vec![p("image", Image, true, IMAGE_DOC)],
            result_fields: vec!["class_id", "candidates"],
            example_args: json!({ "image": "t1-c2-0" }),
        },
        ToolSpec {
            name: "retrieve_rubbings",
            description: "Rank knowledge-base fragments against a whole rubbing, with their interpretations.",
            params: vec![
                p("image", Image, true, IMAGE_DOC),
                p("k", PositiveInt, false, "number of hits, default 3"),
            ],
            result_fields: vec!["hits"],
            example_args: json!({ "image": "t1-in-0", "k": 3 }),
        },
        ToolSpec {
            name: "retrieve_texts",
            description: "BM25 search over interpretations, documents and dictionary senses.",
            params: vec![
                p("query", Text, true, "search text"),
                p("k", PositiveInt, false, "number of hits, default 5"),
            ],
            result_fields: vec!["hits"],
            example_args: json!({ "query": "token-C07 divination", "k": 5 }),
        },
        ToolSpec {
            name: "interpret_fragment",
            description: "Pair each character of a fragment with its modern reading.",
            params: vec![p("fragment_id", FragmentId, true, "fragment identifier")],
            result_fields: vec!["fragment_id", "characters"],
            example_args: json!({ "fragment_id": "SYN-0001" }),
        },
        ToolSpec {
            name: "lookup_dictionary",
            description: "Dictionary senses, linked documents and recorded occurrences of a glyph class.",
            params: vec![p("class_id", ClassId, true, "glyph class identifier")],
            result_fields: vec!["class_id", "modern_reading", "senses", "documents", "occurrences"],
            example_args: json!({ "class_id": "C07" }),
        },
        ToolSpec {
            name: "lookup_fragment",
            description: "Everything the knowledge base holds about one fragment.",
            params: vec![p("fragment_id", FragmentId, true, "fragment identifier")],
            result_fields: vec!["fragment"],
            example_args: json!({ "fragment_id": "SYN-0001" }),
        },
    ]
}

pub fn tool_spec(name: &str) -> Option<ToolSpec> {
    catalog().into_iter().find(|t| t.name == name)
}

fn is_inline_image(v: &Value) -> bool {
    v.as_object()
        .is_some_and(|o| o.len() == 1 && o.get("png_base64").is_some_and(Value::is_string))
}

/// Checks literal arguments against a spec. Returns every problem found,
/// each prefixed with the argument path.
pub fn validate_args(spec: &ToolSpec, args: &Map<String, Value>) -> std::result::Result<(), Vec<String>> {
    let mut problems = Vec::new();
    let known: BTreeSet<&str> = spec.params.iter().map(|p| p.name).collect();
    for key in args.keys() {
        if !known.contains(key.as_str()) {
            problems.push(format!("args.{key}: unknown parameter"));
        }
    }
    for param in &spec.params {
        let Some(v) = args.get(param.name) else {
            if param.required {
                problems.push(format!("args.{}: required", param.name));
            }
            continue;
        };
        let ok = match param.ty {
            ParamType::Image => v.as_str().is_some_and(|s| !s.is_empty()) || is_inline_image(v),
            ParamType::Text | ParamType::FragmentId | ParamType::ClassId => {
                v.as_str().is_some_and(|s| !s.trim().is_empty())
            }
            ParamType::PositiveInt => v.as_u64().is_some_and(|n| n >= 1),
            ParamType::Choice(options) => v.as_str().is_some_and(|s| options.contains(&s)),
        };
        if !ok {
            problems.push(format!("args.{}: expected {:?}", param.name, param.ty));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

/// Resolves image handles during dispatch.
pub trait ImageLookup: Sync {
    fn image(&self, handle: &str) -> Option<RasterImage>;
}

/// No artifacts; only inline images resolve.
pub struct NoArtifacts;

impl ImageLookup for NoArtifacts {
    fn image(&self, _: &str) -> Option<RasterImage> {
        None
    }
}

/// Image produced by a call.
#[derive(Debug, Clone, PartialEq)]
pub struct ProducedImage {
    pub handle: String,
    pub image: RasterImage,
    pub modality: Option<Modality>,
}

/// Where produced images go: named artifacts (`prefix-0`, `prefix-1`, ...)
/// or inline base64 when `prefix` is `None`.
#[derive(Debug, Default)]
pub struct ImageOutputs {
    prefix: Option<String>,
    pub produced: Vec<ProducedImage>,
}

impl ImageOutputs {
    pub fn inline() -> Self {
        Self::default()
    }

    pub fn artifacts(prefix: impl Into<String>) -> Self {
        Self {
            prefix: Some(prefix.into()),
            produced: Vec::new(),
        }
    }

    fn put(&mut self, image: RasterImage, modality: Option<Modality>) -> Value {
        match &self.prefix {
            None => json!({ "png_base64": image.to_base64_png() }),
            Some(prefix) => {
                let handle = format!("{prefix}-{}", self.produced.len());
                self.produced.push(ProducedImage {
                    handle: handle.clone(),
                    image,
                    modality,
                });
                Value::String(handle)
            }
        }
    }
}

/// Everything a tool may read.
pub struct ToolContext<'a> {
    pub kb: &'a KbSnapshot,
    pub vision: &'a VisionTools,
    pub artifacts: &'a dyn ImageLookup,
}

impl ToolContext<'_> {
    fn image_arg(&self, args: &Map<String, Value>, name: &str) -> Result<RasterImage> {
        match args.get(name) {
            Some(Value::String(handle)) => self
                .artifacts
                .image(handle)
                .ok_or_else(|| Error::not_found("artifact", handle.as_str())),
            Some(v) if is_inline_image(v) => RasterImage::from_base64_png(v["png_base64"].as_str().unwrap_or_default()),
            _ => Err(Error::argument(format!("args.{name}: expected an image"))),
        }
    }
}

fn str_arg<'a>(args: &'a Map<String, Value>, name: &str) -> Result<&'a str> {
    args.get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::argument(format!("args.{name}: expected a string")))
}

fn k_arg(args: &Map<String, Value>, default: usize) -> usize {
    args.get("k").and_then(Value::as_u64).map_or(default, |k| k as usize)
}

fn to_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// Runs one request. Unknown tools and invalid arguments become error
/// responses; this never panics on user input.
pub fn dispatch(ctx: &ToolContext<'_>, request: &ToolRequest, outputs: &mut ImageOutputs) -> ToolResponse {
    match run_tool(ctx, request, outputs) {
        Ok(data) => ToolResponse::ok(&request.call_id, data),
        Err(e) => ToolResponse::error(&request.call_id, format!("{}: {e}", e.code())),
    }
}

/// Like [`dispatch`] but keeps the typed error.
pub fn run_tool(ctx: &ToolContext<'_>, request: &ToolRequest, outputs: &mut ImageOutputs) -> Result<Map<String, Value>> {
    let spec = tool_spec(&request.tool).ok_or_else(|| Error::not_found("tool", request.tool.as_str()))?;
    validate_args(&spec, &request.args).map_err(|p| Error::argument(p.join("; ")))?;
    let args = &request.args;
    let data = match spec.name {
        "classify_modality" => {
            let (modality, confidence) = ctx.vision.classify_modality(&ctx.image_arg(args, "image")?);
            json!({ "modality": modality, "confidence": confidence })
        }
        "detect_characters" => {
            let image = ctx.image_arg(args, "image")?;
            let single = if crate::imgproc::is_light_on_dark(&image) {
                Modality::SingleRubbing
            } else {
                Modality::SingleFacsimile
            };
            let dets = ctx.vision.detect_characters(&image);
            let mut out = Vec::with_capacity(dets.len());
            for d in &dets {
                let crop = image.crop(&single_crop_region(&d.bbox, &image.bounds()))?;
                out.push(json!({
                    "bbox": d.bbox.to_array(),
                    "score": d.score,
                    "crop": outputs.put(crop, Some(single)),
                }));
            }
            json!({ "count": dets.len(), "detections": out })
        }
        "denoise_character" => {
            let img = ctx.vision.denoise_character(&ctx.image_arg(args, "image")?);
            json!({ "image": outputs.put(img, Some(Modality::SingleFacsimile)) })
        }
        "generate_facsimile" => {
            let img = ctx.vision.generate_facsimile(&ctx.image_arg(args, "image")?);
            json!({ "image": outputs.put(img, Some(Modality::WholeFacsimile)) })
        }
        "retrieve_glyphs" => {
            let image = ctx.image_arg(args, "image")?;
            let instances = args.get("index").and_then(Value::as_str) == Some("instances");
            let index = if instances {
                ctx.kb.instance_index()
            } else {
                ctx.kb.standard_index()
            };
            let hits = index.search(&glyph_descriptor(&image), k_arg(args, 5))?;
            let hits: Vec<Value> = hits
                .into_iter()
                .map(|h| {
                    let mut v = serde_json::to_value(&h).expect("hit serialises");
                    if instances {
                        if let Some(c) = ctx.kb.character(&h.target_id) {
                            v["fragment_id"] = json!(c.fragment_id);
                        }
                    }
                    v
                })
                .collect();
            json!({ "hits": hits })
        }
        "classify_glyph" => {
            let image = ctx.image_arg(args, "image")?;
            serde_json::to_value(classify_glyph(&image, ctx.kb.standard_index())?)?
        }
        "retrieve_rubbings" => {
            let image = ctx.image_arg(args, "image")?;
            json!({ "hits": retrieve_rubbings(&image, ctx.kb, k_arg(args, 3))? })
        }
        "retrieve_texts" => {
            let hits = retrieve_texts(ctx.kb.text_index(), str_arg(args, "query")?, k_arg(args, 5))?;
            json!({ "hits": hits })
        }
        "interpret_fragment" => {
            let id = FragmentId::new(str_arg(args, "fragment_id")?)?;
            json!({ "fragment_id": id, "characters": interpret_fragment(ctx.kb, &id)? })
        }
        "lookup_dictionary" => {
            let class = GlyphClassId::new(str_arg(args, "class_id")?)?;
            let senses = lookup_dictionary(ctx.kb, &class)?;
            let reading = ctx.kb.glyph_class(&class).first().map(|e| e.modern_reading.clone());
            let documents: Vec<Value> = ctx
                .kb
                .documents_for_class(&class)
                .into_iter()
                .map(|d| json!({ "doc_id": d.doc_id, "chunk_id": d.chunk_id, "text": d.text }))
                .collect();
            let fragments: BTreeSet<&FragmentId> =
                ctx.kb.class_instances(&class).into_iter().map(|c| &c.fragment_id).collect();
            let mut occurrences = Vec::new();
            for f in fragments {
                let rubbing = ctx.kb.lookup_fragment(f)?.rubbing;
                occurrences.push(json!({
                    "fragment_id": f,
                    "catalog": rubbing.as_ref().map(|r| r.provenance.catalog.clone()),
                    "plate": rubbing.as_ref().map(|r| r.provenance.plate.clone()),
                }));
            }
            json!({
                "class_id": class,
                "modern_reading": reading,
                "senses": senses,
                "documents": documents,
                "occurrences": occurrences,
            })
        }
        "lookup_fragment" => {
            let id = FragmentId::new(str_arg(args, "fragment_id")?)?;
            json!({ "fragment": ctx.kb.lookup_fragment(&id)? })
        }
        other => return Err(Error::not_found("tool", other)),
    };
    Ok(to_map(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique_and_examples_validate() {
        let specs = catalog();
        let names: BTreeSet<&str> = specs.iter().map(|s| s.name).collect();
        assert_eq!(names.len(), specs.len());
        for s in &specs {
            let args = s.example_args.as_object().unwrap();
            assert_eq!(validate_args(s, args), Ok(()), "{}", s.name);
        }
    }

    #[test]
    fn validation_reports_paths() {
        let spec = tool_spec("retrieve_glyphs").unwrap();
        let args = json!({ "k": 0, "index": "nope", "extra": 1 });
        let problems = validate_args(&spec, args.as_object().unwrap()).unwrap_err();
        assert!(problems.iter().any(|p| p.starts_with("args.image")));
        assert!(problems.iter().any(|p| p.starts_with("args.k")));
        assert!(problems.iter().any(|p| p.starts_with("args.index")));
        assert!(problems.iter().any(|p| p.starts_with("args.extra")));
    }

    #[test]
    fn unknown_tool_is_not_found() {
        let kb = KbSnapshot::default();
        let vision = VisionTools::new();
        let ctx = ToolContext { kb: &kb, vision: &vision, artifacts: &NoArtifacts };
        let req = ToolRequest { tool: "nope".into(), args: Map::new(), call_id: "c1".into() };
        let err = run_tool(&ctx, &req, &mut ImageOutputs::inline()).unwrap_err();
        assert_eq!(err.code(), "tool_not_found");
        let resp = dispatch(&ctx, &req, &mut ImageOutputs::inline());
        assert!(!resp.is_ok());
    }
}
