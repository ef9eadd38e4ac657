//! Template rendering of tool results into a plain-text answer.

use serde_json::Value;

use super::trace::{CallOutcome, TraceEvent};

fn s(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        Value::Null => "?".into(),
        other => other.to_string(),
    }
}

fn list<T>(items: impl Iterator<Item = T>, limit: usize, f: impl Fn(T) -> String) -> String {
    let mut out: Vec<String> = items.take(limit + 1).map(f).collect();
    if out.len() > limit {
        out.truncate(limit);
        out.push("...".into());
    }
    out.join(", ")
}

fn arr(v: &Value) -> &[Value] {
    v.as_array().map(Vec::as_slice).unwrap_or_default()
}

/// One line per call.
pub fn summarize_event(e: &TraceEvent) -> String {
    match e.status {
        CallOutcome::Skipped => return format!("{} was skipped ({}).", e.tool, e.error.as_deref().unwrap_or("")),
        CallOutcome::Error => return format!("{} failed: {}.", e.tool, e.error.as_deref().unwrap_or("unknown error")),
        CallOutcome::Ok => {}
    }
    let d = Value::Object(e.data.clone());
    match e.tool.as_str() {
        "classify_modality" => format!(
            "The image is a {} (confidence {:.2}).",
            s(&d["modality"]).replace('-', " "),
            d["confidence"].as_f64().unwrap_or(0.0)
        ),
        "detect_characters" => format!(
            "Detected {} characters: {}.",
            d["count"],
            list(arr(&d["detections"]).iter(), 12, |x| format!("{} {}", s(&x["crop"]), x["bbox"]))
        ),
        "denoise_character" => format!("Denoised glyph stored as {}.", s(&d["image"])),
        "generate_facsimile" => format!("Facsimile stored as {}.", s(&d["image"])),
        "retrieve_glyphs" => format!(
            "Nearest glyphs: {}.",
            list(arr(&d["hits"]).iter(), 5, |h| {
                let mut t = format!("{} ({}, {:.3})", s(&h["target_id"]), s(&h["label"]), h["score"].as_f64().unwrap_or(0.0));
                if let Some(f) = h.get("fragment_id") {
                    t.push_str(&format!(" on {}", s(f)));
                }
                t
            })
        ),
        "classify_glyph" => {
            let votes = arr(&d["candidates"]).first().map(|c| c["votes"].clone()).unwrap_or(Value::Null);
            format!("Classified as {} ({} of the nearest standard glyphs agree).", s(&d["class_id"]), votes)
        }
        "retrieve_rubbings" => format!(
            "Closest fragments: {}.",
            list(arr(&d["hits"]).iter(), 3, |h| format!(
                "{} ({:.3})",
                s(&h["target_id"]),
                h["score"].as_f64().unwrap_or(0.0)
            ))
        ),
        "retrieve_texts" => {
            let hits = arr(&d["hits"]);
            if hits.is_empty() {
                "No matching texts.".into()
            } else {
                format!(
                    "Matching texts: {}.",
                    list(hits.iter(), 3, |h| format!("{} \"{}\"", s(&h["chunk_id"]), s(&h["snippet"])))
                )
            }
        }
        "interpret_fragment" => format!(
            "Reading of {}: {}.",
            s(&d["fragment_id"]),
            list(arr(&d["characters"]).iter(), 40, |c| match c["modern_reading"].as_str() {
                Some(r) => r.to_string(),
                None => "[unreadable]".into(),
            })
        ),
        "lookup_dictionary" => {
            let mut t = format!("{} reads {}.", s(&d["class_id"]), s(&d["modern_reading"]));
            let senses = arr(&d["senses"]);
            if !senses.is_empty() {
                t.push_str(&format!(
                    " Senses: {}.",
                    list(senses.iter(), 3, |x| format!("{}: {}", s(&x["source"]), s(&x["text"])))
                ));
            }
            let docs = arr(&d["documents"]);
            if !docs.is_empty() {
                t.push_str(&format!(" Documents: {}.", list(docs.iter(), 5, |x| s(&x["doc_id"]))));
            }
            let occ = arr(&d["occurrences"]);
            if !occ.is_empty() {
                t.push_str(&format!(
                    " Recorded on {}.",
                    list(occ.iter(), 8, |x| format!("{} ({}, {})", s(&x["fragment_id"]), s(&x["catalog"]), s(&x["plate"])))
                ));
            }
            t
        }
        "lookup_fragment" => {
            let f = &d["fragment"];
            format!(
                "Fragment {} has {} characters and {} interpretations.",
                s(&f["fragment_id"]),
                arr(&f["characters"]).len(),
                arr(&f["interpretations"]).len()
            )
        }
        other => format!("{other} finished."),
    }
}

pub fn render_response(events: &[TraceEvent], note: Option<&str>) -> String {
    let mut lines: Vec<String> = events.iter().map(summarize_event).collect();
    if let Some(n) = note {
        lines.push(format!("Note: {n}."));
    }
    if lines.is_empty() {
        "Nothing to report.".into()
    } else {
        lines.join("\n")
    }
}
