//! Exhaustive cosine retrieval over descriptor collections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::denoise::denoise_character;
use super::descriptor::{encode_glyph, encode_mask, VisualDescriptor};
use super::detect::MIN_COMPONENT_AREA;
use crate::error::{Error, Result};
use crate::imgproc::binarize;
use crate::kb::{InterpretationRecord, KbSnapshot};
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub target_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    /// Class label of the target, when the index carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub descriptor: VisualDescriptor,
}

/// Descriptor collection kept in ascending id order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescriptorIndex {
    entries: Vec<IndexEntry>,
}

impl DescriptorIndex {
    pub fn new(entries: impl IntoIterator<Item = IndexEntry>) -> Self {
        let mut by_id: BTreeMap<String, IndexEntry> = BTreeMap::new();
        for e in entries {
            by_id.insert(e.id.clone(), e);
        }
        Self {
            entries: by_id.into_values().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Top-`k` by cosine similarity, ties broken by ascending id.
    pub fn search(&self, query: &VisualDescriptor, k: usize) -> Result<Vec<RankedHit>> {
        if k == 0 {
            return Err(Error::argument("k must be positive"));
        }
        if self.entries.is_empty() {
            return Err(Error::State("descriptor index is empty".into()));
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, query.cosine(&e.descriptor) as f64))
            .collect();
        // Entries are id-sorted, so index order is the id tie-break.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(rank, (i, score))| RankedHit {
                target_id: self.entries[i].id.clone(),
                score,
                rank: rank + 1,
                label: self.entries[i].label.clone(),
            })
            .collect())
    }
}

/// Descriptor used for every glyph-level comparison: denoise, normalise
/// framing, encode.
pub fn glyph_descriptor(crop: &RasterImage) -> VisualDescriptor {
    encode_glyph(&denoise_character(crop))
}

/// Descriptor used for whole-image comparison: speckle-free ink mask encoded
/// over the full frame.
pub fn whole_image_descriptor(image: &RasterImage) -> VisualDescriptor {
    encode_mask(&binarize(image).without_small_components(MIN_COMPONENT_AREA))
}

pub fn retrieve_glyphs(
    query: &VisualDescriptor,
    index: &DescriptorIndex,
    k: usize,
) -> Result<Vec<RankedHit>> {
    index.search(query, k)
}

/// Votes of one class among the retrieved neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVote {
    pub class_id: String,
    pub votes: usize,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphClassification {
    pub class_id: String,
    /// Ranked by votes, then best score, then ascending class id.
    pub candidates: Vec<ClassVote>,
}

/// Number of standard images that vote in [`classify_glyph`].
pub const CLASSIFY_NEIGHBOURS: usize = 5;

/// Majority vote over the five nearest standard images.
pub fn classify_glyph(crop: &RasterImage, standard: &DescriptorIndex) -> Result<GlyphClassification> {
    classify_descriptor(&glyph_descriptor(crop), standard)
}

pub fn classify_descriptor(
    query: &VisualDescriptor,
    standard: &DescriptorIndex,
) -> Result<GlyphClassification> {
    if standard.is_empty() {
        return Err(Error::State("standard glyph index is empty".into()));
    }
    let hits = standard.search(query, CLASSIFY_NEIGHBOURS)?;
    Ok(vote(&hits))
}

pub(crate) fn vote(hits: &[RankedHit]) -> GlyphClassification {
    let mut tally: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for h in hits {
        let class = h.label.clone().unwrap_or_else(|| h.target_id.clone());
        let e = tally.entry(class).or_insert((0, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.max(h.score);
    }
    let mut candidates: Vec<ClassVote> = tally
        .into_iter()
        .map(|(class_id, (votes, best_score))| ClassVote {
            class_id,
            votes,
            best_score,
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(b.best_score.total_cmp(&a.best_score))
            .then(a.class_id.cmp(&b.class_id))
    });
    GlyphClassification {
        class_id: candidates.first().map(|c| c.class_id.clone()).unwrap_or_default(),
        candidates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubbingHit {
    #[serde(flatten)]
    pub hit: RankedHit,
    pub interpretations: Vec<InterpretationRecord>,
}

/// Ranks the snapshot's fragments against a whole rubbing image and attaches
/// each hit's interpretation records.
pub fn retrieve_rubbings(query: &RasterImage, kb: &KbSnapshot, k: usize) -> Result<Vec<RubbingHit>> {
    if kb.rubbing_index().is_empty() {
        return Err(Error::State("rubbing store is empty".into()));
    }
    let hits = kb.rubbing_index().search(&whole_image_descriptor(query), k)?;
    hits.into_iter()
        .map(|hit| {
            let fragment = crate::kb::FragmentId::new(hit.target_id.clone())?;
            let bundle = kb.lookup_fragment(&fragment)?;
            Ok(RubbingHit {
                hit,
                interpretations: bundle.interpretations,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::descriptor::DESCRIPTOR_DIMS;

    fn unit(values: &[(usize, f32)]) -> VisualDescriptor {
        let mut v = vec![0.0; DESCRIPTOR_DIMS];
        for &(i, x) in values {
            v[i] = x;
        }
        VisualDescriptor::from_values(v).unwrap()
    }

    fn entry(id: &str, label: &str, d: VisualDescriptor) -> IndexEntry {
        IndexEntry {
            id: id.into(),
            label: Some(label.into()),
            descriptor: d,
        }
    }

    #[test]
    fn empty_index_and_zero_k() {
        let idx = DescriptorIndex::default();
        assert!(matches!(idx.search(&unit(&[(0, 1.0)]), 1), Err(Error::State(_))));
        let idx = DescriptorIndex::new([entry("a", "A", unit(&[(0, 1.0)]))]);
        assert!(matches!(idx.search(&unit(&[(0, 1.0)]), 0), Err(Error::Argument(_))));
    }

    #[test]
    fn truncates_to_store_size() {
        let idx = DescriptorIndex::new(
            (0..4).map(|i| entry(&format!("g{i}"), "A", unit(&[(i, 1.0)]))),
        );
        assert_eq!(idx.search(&unit(&[(0, 1.0)]), 10).unwrap().len(), 4);
    }

    #[test]
    fn ties_break_on_id() {
        let d = unit(&[(0, 1.0)]);
        let idx = DescriptorIndex::new([entry("b", "B", d.clone()), entry("a", "A", d.clone())]);
        let hits = idx.search(&d, 2).unwrap();
        assert_eq!(hits[0].target_id, "a");
        assert_eq!(hits[1].target_id, "b");
    }

    #[test]
    fn equal_votes_fall_back_to_best_score() {
        let hits = vec![
            RankedHit { target_id: "x1".into(), score: 0.9, rank: 1, label: Some("C2".into()) },
            RankedHit { target_id: "y1".into(), score: 0.95, rank: 2, label: Some("C1".into()) },
            RankedHit { target_id: "x2".into(), score: 0.5, rank: 3, label: Some("C2".into()) },
            RankedHit { target_id: "y2".into(), score: 0.4, rank: 4, label: Some("C1".into()) },
        ];
        let c = vote(&hits);
        assert_eq!(c.class_id, "C1");
        assert_eq!(c.candidates[0].votes, 2);
        assert_eq!(c.candidates[1].class_id, "C2");
    }

    #[test]
    fn empty_standard_index_is_state_error() {
        let crop = RasterImage::filled(10, 10, 255);
        assert!(matches!(
            classify_glyph(&crop, &DescriptorIndex::default()),
            Err(Error::State(_))
        ));
    }
}
