//! Saves a snapshot, loads it back and re-ingests it as a payload.
//!
//!     cargo run --example kb_snapshot -p scriptorium -- /tmp/kb

use std::path::PathBuf;

use scriptorium::kb::{ingest_dir, load_snapshot, save_snapshot};
use scriptorium::synth::{generate_corpus, SynthConfig};

fn main() -> scriptorium::error::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("scriptorium-kb"));
    let kb = generate_corpus(&SynthConfig::default())?.build_snapshot()?;
    let manifest = save_snapshot(&kb, &dir)?;
    println!("saved to {}", dir.display());
    for (name, digest) in &manifest.files {
        println!("  {name:<22} {}", &digest[..16]);
    }

    let loaded = load_snapshot(&dir)?;
    println!("reloaded: manifest equal {}, integrity problems {}", loaded.manifest() == manifest, loaded.verify_integrity().len());

    let (builder, reports) = ingest_dir(&dir)?;
    for r in &reports {
        println!("  {:<16} accepted {:>4} rejected {}", r.store.name(), r.accepted, r.rejected_count());
    }
    println!("re-ingested snapshot identical: {}", builder.build_indexes().manifest() == manifest);

    let first = &kb.fragment_ids()[0];
    let bundle = loaded.lookup_fragment(first)?;
    println!("{}: {} characters, {} linked documents", first.as_str(), bundle.characters.len(), bundle.documents.len());
    Ok(())
}
