//! Inverted index with exact BM25 top-k.
//!
//! Scoring uses the non-negative idf variant
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` and the usual saturation
//! term `tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))`, summed
//! over the distinct query terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};
use crate::kb::{FragmentId, GlyphClassId};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

const SNIPPET_CHARS: usize = 160;

/// What a chunk was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SourceRef {
    Interpretation { fragment_id: FragmentId, source: String },
    Document { doc_id: String, chunk_id: String },
    Dictionary { class_id: GlyphClassId, sense: usize },
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub chunk_id: String,
    pub text: String,
    pub source: SourceRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Ordinal of the chunk in ascending chunk-id order.
    pub chunk: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextIndex {
    chunks: Vec<TextChunk>,
    lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextHit {
    pub rank: usize,
    pub chunk_id: String,
    pub score: f64,
    pub snippet: String,
    pub source: SourceRef,
}

impl TextIndex {
    /// Builds the index. Chunks are ordered by id; later duplicates of an id
    /// are dropped.
    pub fn build(chunks: impl IntoIterator<Item = TextChunk>) -> Self {
        let mut by_id: BTreeMap<String, TextChunk> = BTreeMap::new();
        for c in chunks {
            by_id.entry(c.chunk_id.clone()).or_insert(c);
        }
        let chunks: Vec<TextChunk> = by_id.into_values().collect();
        let mut lengths = Vec::with_capacity(chunks.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (ordinal, chunk) in chunks.iter().enumerate() {
            let tokens = tokenize(&chunk.text);
            lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    chunk: ordinal as u32,
                    tf: count,
                });
            }
        }
        let total: u64 = lengths.iter().map(|&l| l as u64).sum();
        let avg_len = if chunks.is_empty() {
            0.0
        } else {
            total as f64 / chunks.len() as f64
        };
        Self {
            chunks,
            lengths,
            postings,
            avg_len,
        }
    }

    /// Number of indexed chunks.
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn chunks(&self) -> &[TextChunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&TextChunk> {
        self.chunks
            .binary_search_by(|c| c.chunk_id.as_str().cmp(chunk_id))
            .ok()
            .map(|i| &self.chunks[i])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.postings.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.chunks.len() as f64;
        let df = self.postings(term).len() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Exact BM25 top-`k`; ties broken by ascending chunk id. Chunks sharing
    /// no term with the query are never returned.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<TextHit>> {
        if k == 0 {
            return Err(Error::argument("k must be positive"));
        }
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for term in &terms {
            let idf = self.idf(term);
            for p in self.postings(term) {
                let len = self.lengths[p.chunk as usize] as f64;
                let norm = if self.avg_len > 0.0 { len / self.avg_len } else { 0.0 };
                let tf = p.tf as f64;
                let s = idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * norm));
                *scores.entry(p.chunk).or_default() += s;
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
        // Ordinals follow chunk-id order, so the ordinal is the id tie-break.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked
            .into_iter()
            .enumerate()
            .map(|(i, (ord, score))| {
                let c = &self.chunks[ord as usize];
                TextHit {
                    rank: i + 1,
                    chunk_id: c.chunk_id.clone(),
                    score,
                    snippet: c.text.chars().take(SNIPPET_CHARS).collect(),
                    source: c.source.clone(),
                }
            })
            .collect())
    }
}

/// Optional dense rescoring backend (an embedding model behind a client).
pub trait EmbeddingClient: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>>;
}

/// BM25 candidate generation (`4k` candidates) followed by cosine rescoring
/// with an embedding client. Falls back to plain BM25 ordering on client
/// failure.
pub fn retrieve_rescored(
    index: &TextIndex,
    query: &str,
    k: usize,
    client: &dyn EmbeddingClient,
) -> Result<Vec<TextHit>> {
    let candidates = index.retrieve(query, k.saturating_mul(4))?;
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let mut texts = vec![query.to_string()];
    texts.extend(
        candidates
            .iter()
            .map(|h| index.chunk(&h.chunk_id).map(|c| c.text.clone()).unwrap_or_default()),
    );
    let Ok(vectors) = client.embed(&texts) else {
        let mut hits = candidates;
        hits.truncate(k);
        return Ok(hits);
    };
    if vectors.len() != texts.len() {
        return Err(Error::External(format!(
            "embedding client returned {} vectors for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    let q = &vectors[0];
    let mut rescored: Vec<TextHit> = candidates
        .into_iter()
        .zip(&vectors[1..])
        .map(|(mut h, v)| {
            h.score = cosine(q, v);
            h
        })
        .collect();
    rescored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.chunk_id.cmp(&b.chunk_id)));
    rescored.truncate(k);
    for (i, h) in rescored.iter_mut().enumerate() {
        h.rank = i + 1;
    }
    Ok(rescored)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, text: &str) -> TextChunk {
        TextChunk {
            chunk_id: id.into(),
            text: text.into(),
            source: SourceRef::Other,
        }
    }

    #[test]
    fn empty_index() {
        let idx = TextIndex::build(Vec::new());
        assert_eq!(idx.len(), 0);
        assert!(idx.retrieve("anything", 3).unwrap().is_empty());
    }

    #[test]
    fn shared_term_postings() {
        let idx = TextIndex::build(vec![chunk("a", "ox bone"), chunk("b", "turtle bone")]);
        assert_eq!(idx.postings("bone").len(), 2);
        assert_eq!(idx.postings("ox").len(), 1);
    }

    #[test]
    fn zero_k_is_an_error() {
        let idx = TextIndex::build(vec![chunk("a", "x")]);
        assert!(matches!(idx.retrieve("x", 0), Err(Error::Argument(_))));
    }

    #[test]
    fn unknown_terms_give_nothing() {
        let idx = TextIndex::build(vec![chunk("a", "ox bone")]);
        assert!(idx.retrieve("plastron", 5).unwrap().is_empty());
    }

    struct Reverse;
    impl EmbeddingClient for Reverse {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
            Ok(texts
                .iter()
                .map(|t| vec![t.len() as f32, if t.contains("turtle") { 5.0 } else { 0.0 }])
                .collect())
        }
    }

    #[test]
    fn rescoring_reorders_candidates() {
        let idx = TextIndex::build(vec![chunk("a", "bone bone bone"), chunk("b", "turtle bone")]);
        let plain = idx.retrieve("bone turtle", 2).unwrap();
        assert_eq!(plain[0].chunk_id, "b");
        let hits = retrieve_rescored(&idx, "bone", 2, &Reverse).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].chunk_id, "a");
    }
}
