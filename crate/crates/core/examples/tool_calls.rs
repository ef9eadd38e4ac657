//! Dispatches wire-format tool requests the way the HTTP service does.
//!
//!     cargo run --example tool_calls -p scriptorium

use scriptorium::agent::{catalog, dispatch, ImageOutputs, NoArtifacts, ToolContext};
use scriptorium::synth::{generate_corpus, SynthConfig};
use scriptorium::vision::VisionTools;
use scriptorium::wire::ToolRequest;
use serde_json::json;

fn main() -> scriptorium::error::Result<()> {
    let corpus = generate_corpus(&SynthConfig::default())?;
    let kb = corpus.build_snapshot()?;
    let vision = VisionTools::new();
    let ctx = ToolContext {
        kb: &kb,
        vision: &vision,
        artifacts: &NoArtifacts,
    };
    for spec in catalog() {
        println!("{:<20} {}", spec.name, spec.description);
    }

    let rubbing = corpus.images[&corpus.ground_truth.fragments[0].rubbing_ref].to_base64_png();
    let requests = [
        json!({ "tool": "classify_modality", "args": { "image": { "png_base64": rubbing } }, "call_id": "c1" }),
        json!({ "tool": "lookup_dictionary", "args": { "class_id": "C02" }, "call_id": "c2" }),
        json!({ "tool": "lookup_fragment", "args": { "fragment_id": "SYN-9999" }, "call_id": "c3" }),
    ];
    for raw in requests {
        let request: ToolRequest = serde_json::from_value(raw)?;
        let response = dispatch(&ctx, &request, &mut ImageOutputs::inline());
        let mut text = serde_json::to_string(&response)?;
        text.truncate(160);
        println!("{text}");
    }
    Ok(())
}
