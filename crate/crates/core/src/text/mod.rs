//! Lexical retrieval over interpretation texts, documents and the
//! dictionary, plus fragment-level reading alignment.

mod bm25;
mod tokenize;

pub use bm25::{
    retrieve_rescored, EmbeddingClient, Posting, SourceRef, TextChunk, TextHit, TextIndex, B, K1,
};
pub use tokenize::{is_cjk_ideograph, tokenize};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{CharacterInstance, DictionarySense, FragmentId, GlyphClassId, KbSnapshot};

pub fn index_texts(chunks: impl IntoIterator<Item = TextChunk>) -> TextIndex {
    TextIndex::build(chunks)
}

pub fn retrieve_texts(index: &TextIndex, query: &str, k: usize) -> Result<Vec<TextHit>> {
    index.retrieve(query, k)
}

/// One character of a fragment paired with its modern reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCharacter {
    pub character: CharacterInstance,
    /// `None` exactly when `unreadable` is set.
    pub modern_reading: Option<String>,
    pub unreadable: bool,
}

/// Pairs each character (in reading order) with its aligned reading.
///
/// When several interpretation records carry alignments, the first source in
/// ascending order that covers a reading index wins.
pub fn interpret_fragment(kb: &KbSnapshot, id: &FragmentId) -> Result<Vec<AlignedCharacter>> {
    let bundle = kb.lookup_fragment(id)?;
    let mut readings: BTreeMap<u32, String> = BTreeMap::new();
    for interp in &bundle.interpretations {
        for a in interp.aligned_readings.iter().flatten() {
            readings
                .entry(a.reading_index)
                .or_insert_with(|| a.modern_reading.clone());
        }
    }
    Ok(bundle
        .characters
        .into_iter()
        .map(|c| {
            let modern_reading = readings.get(&c.reading_index).cloned();
            AlignedCharacter {
                unreadable: modern_reading.is_none(),
                modern_reading,
                character: c,
            }
        })
        .collect())
}

/// Dictionary senses of a class, ordered by source (stable for equal sources).
pub fn lookup_dictionary(kb: &KbSnapshot, class: &GlyphClassId) -> Result<Vec<DictionarySense>> {
    if kb.glyph_class(class).is_empty() {
        return Err(Error::not_found("class", class.as_str()));
    }
    let mut senses = kb
        .dictionary_entry(class)
        .map(|e| e.entries.clone())
        .unwrap_or_default();
    senses.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(senses)
}
