//! Runs the built-in vision tools on one synthetic rubbing.
//!
//!     cargo run --example vision_tools -p scriptorium

use scriptorium::bench::metric_ssim;
use scriptorium::synth::{generate_corpus, SynthConfig};
use scriptorium::vision::{encode_image, retrieve_glyphs, retrieve_rubbings, VisionTools};

fn main() -> scriptorium::error::Result<()> {
    let corpus = generate_corpus(&SynthConfig::default())?;
    let kb = corpus.build_snapshot()?;
    let truth = &corpus.ground_truth.fragments[3];
    let rubbing = &corpus.images[&truth.rubbing_ref];
    let tools = VisionTools::new();

    let (modality, confidence) = tools.classify_modality(rubbing);
    println!("modality {modality:?} ({confidence:.2})");

    let detections = tools.detect_characters(rubbing);
    println!("{} detections, {} annotated", detections.len(), truth.characters.len());
    for d in &detections {
        let crop = tools.denoise_character(&rubbing.crop(&d.bbox)?);
        let hit = &retrieve_glyphs(&encode_image(&crop), kb.standard_index(), 1)?[0];
        println!("  {:?} -> {} ({:.3})", d.bbox, hit.label.as_deref().unwrap_or("?"), hit.score);
    }

    let facsimile = tools.generate_facsimile(rubbing);
    let ssim = metric_ssim(&facsimile, &corpus.images[&truth.facsimile_ref])?;
    println!("generated facsimile SSIM {ssim:.3}");

    for hit in retrieve_rubbings(rubbing, &kb, 3)? {
        println!("rubbing hit #{} {} ({:.3})", hit.hit.rank, hit.hit.target_id, hit.hit.score);
    }
    Ok(())
}
