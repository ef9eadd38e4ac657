//! BM25 search over interpretations, documents and dictionary senses.
//!
//!     cargo run --example text_search -p scriptorium -- "token-C04 rain"

use scriptorium::synth::{generate_corpus, SynthConfig};
use scriptorium::text::{interpret_fragment, retrieve_texts};

fn main() -> scriptorium::error::Result<()> {
    let query = std::env::args().nth(1).unwrap_or_else(|| "token-C04".into());
    let kb = generate_corpus(&SynthConfig::default())?.build_snapshot()?;
    for hit in retrieve_texts(kb.text_index(), &query, 5)? {
        println!("{:>2}. {:<28} {:>6.3}  {}", hit.rank, hit.chunk_id, hit.score, hit.snippet);
    }
    let first = &kb.fragment_ids()[0];
    let readings: Vec<String> = interpret_fragment(&kb, first)?.into_iter().map(|a| a.modern_reading.unwrap_or_else(|| "?".into())).collect();
    println!("{}: {}", first.as_str(), readings.join(" "));
    Ok(())
}
