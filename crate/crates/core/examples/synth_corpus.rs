//! Generates a small synthetic corpus and prints what ended up in each store.
//!
//!     cargo run --example synth_corpus -p scriptorium -- [seed]

use scriptorium::kb::StoreKind;
use scriptorium::synth::{generate_corpus, NoiseLevel, SynthConfig};

fn main() -> scriptorium::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let config = SynthConfig {
        seed,
        n_fragments: 6,
        noise: NoiseLevel::High,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config)?;
    for store in [StoreKind::GlyphIndex, StoreKind::ImagePairs, StoreKind::Interpretations, StoreKind::Documents, StoreKind::Dictionary] {
        println!("{:<16} {} records", store.name(), corpus.count(store));
    }
    println!("{} images", corpus.images.len());
    for f in &corpus.ground_truth.fragments {
        println!("{}  {} glyphs  \"{}\"", f.fragment_id.as_str(), f.characters.len(), f.interpretation);
    }
    Ok(())
}
