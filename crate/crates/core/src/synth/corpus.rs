use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fragment::{render_fragment, single_crop_region, CharAnnotation};
use super::glyph::{class_id, reading_token, GlyphBank};
use super::rubbing::{render_rubbing, NoiseLevel};
use super::seed::derive_seed;
use crate::error::{Error, Result};
use crate::kb::*;
use crate::raster::RasterImage;
use crate::vision::GLYPH_CANVAS;

pub const SYNTH_CATALOG: &str = "Synthetic Rubbing Catalogue";
pub const INTERPRETATION_SOURCE: &str = "synthetic transcription";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_classes: usize,
    pub n_fragments: usize,
    /// Inclusive range of glyphs per fragment.
    pub chars_per_fragment: (usize, usize),
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub glyph_size: u32,
    pub noise: NoiseLevel,
    pub n_documents: usize,
    pub standards_per_class: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_classes: 10,
            n_fragments: 20,
            chars_per_fragment: (3, 6),
            canvas_width: 320,
            canvas_height: 320,
            glyph_size: 48,
            noise: NoiseLevel::Low,
            n_documents: 4,
            standards_per_class: 3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_classes", self.n_classes),
            ("n_fragments", self.n_fragments),
            ("chars_per_fragment", self.chars_per_fragment.0),
            ("n_documents", self.n_documents),
            ("standards_per_class", self.standards_per_class),
            ("glyph_size", self.glyph_size as usize),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::argument(format!("{name} must be at least 1")));
        }
        if self.chars_per_fragment.0 > self.chars_per_fragment.1 {
            return Err(Error::argument("chars_per_fragment range is empty"));
        }
        if self.glyph_size < 16 {
            return Err(Error::argument("glyph_size must be at least 16"));
        }
        Ok(())
    }

    pub fn fragment_id(index: usize) -> FragmentId {
        FragmentId::new(format!("SYN-{:04}", index + 1)).expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentTruth {
    pub fragment_id: FragmentId,
    pub fragment_seed: u64,
    pub rubbing_ref: String,
    pub facsimile_ref: String,
    pub characters: Vec<CharAnnotation>,
    pub interpretation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTruth {
    pub class_id: GlyphClassId,
    pub modern_reading: String,
    pub standard_refs: Vec<String>,
    /// Fragments containing the class, ascending.
    pub fragments: Vec<FragmentId>,
}

/// Ground-truth sidecar written next to a generated snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub fragments: Vec<FragmentTruth>,
    pub classes: Vec<ClassTruth>,
    pub text_chunk_count: usize,
}

impl GroundTruth {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn fragment(&self, id: &FragmentId) -> Option<&FragmentTruth> {
        self.fragments.iter().find(|f| &f.fragment_id == id)
    }
}

/// Ingestion payload for all five stores plus ground truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<Record>,
    pub images: BTreeMap<String, RasterImage>,
    pub ground_truth: GroundTruth,
    pub bank: GlyphBank,
}

impl SynthCorpus {
    pub fn count(&self, store: StoreKind) -> usize {
        self.records.iter().filter(|r| r.store() == store).count()
    }

    /// Ingests the payload and builds indexes; fails if anything is rejected.
    pub fn build_snapshot(&self) -> Result<KbSnapshot> {
        let mut builder = KbBuilder::new();
        for report in builder.ingest_all(self.records.iter().cloned(), &self.images) {
            if let Some(r) = report.rejected.first() {
                return Err(Error::State(format!(
                    "generated record {} rejected: {} ({})",
                    r.key, r.reason, r.detail
                )));
            }
        }
        Ok(builder.build_indexes())
    }
}

struct RenderedItem {
    truth: FragmentTruth,
    facsimile: RasterImage,
    rubbing: RasterImage,
}

/// Generates a complete synthetic corpus. Deterministic in `config`.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let bank = GlyphBank::generate(config.seed, config.n_classes);

    let rendered: Vec<RenderedItem> = (0..config.n_fragments)
        .into_par_iter()
        .map(|i| {
            let fragment_seed = derive_seed(config.seed, "fragment", i as u64);
            let f = render_fragment(config, &bank, fragment_seed)?;
            let rubbing = render_rubbing(&f.facsimile, config.noise, derive_seed(fragment_seed, "noise", 0));
            let id = SynthConfig::fragment_id(i);
            Ok(RenderedItem {
                truth: FragmentTruth {
                    rubbing_ref: format!("rubbings/{id}.png"),
                    facsimile_ref: format!("facsimiles/{id}.png"),
                    fragment_id: id,
                    fragment_seed,
                    characters: f.annotations,
                    interpretation: f.interpretation,
                },
                facsimile: f.facsimile,
                rubbing,
            })
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<Record> = Vec::new();
    let mut images: BTreeMap<String, RasterImage> = BTreeMap::new();

    let mut class_fragments: BTreeMap<String, BTreeSet<FragmentId>> = BTreeMap::new();
    for item in &rendered {
        for c in &item.truth.characters {
            class_fragments
                .entry(c.class_id.clone())
                .or_default()
                .insert(item.truth.fragment_id.clone());
        }
    }

    let mut classes = Vec::with_capacity(config.n_classes);
    for ci in 0..config.n_classes {
        let cid = class_id(ci);
        let standard_refs: Vec<String> = (0..config.standards_per_class)
            .map(|k| format!("standards/{cid}-a-{k}.png"))
            .collect();
        for (k, key) in standard_refs.iter().enumerate() {
            let seed = derive_seed(config.seed, &format!("standard/{cid}"), k as u64);
            images.insert(key.clone(), bank.generate_glyph(&cid, seed, GLYPH_CANVAS)?);
        }
        let class = GlyphClassId::new(cid.clone())?;
        records.push(Record::GlyphClass(GlyphClassEntry {
            class_id: class.clone(),
            subclass_id: format!("{cid}-a"),
            modern_reading: reading_token(&cid),
            standard_image_refs: standard_refs.clone(),
        }));
        classes.push(ClassTruth {
            class_id: class,
            modern_reading: reading_token(&cid),
            standard_refs,
            fragments: class_fragments
                .get(&cid)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default(),
        });
    }

    for (i, item) in rendered.iter().enumerate() {
        let t = &item.truth;
        images.insert(t.rubbing_ref.clone(), item.rubbing.clone());
        images.insert(t.facsimile_ref.clone(), item.facsimile.clone());
        records.push(Record::Rubbing(RubbingRecord {
            fragment_id: t.fragment_id.clone(),
            image_ref: t.rubbing_ref.clone(),
            provenance: Provenance {
                catalog: SYNTH_CATALOG.into(),
                plate: format!("plate {:04}", i + 1),
            },
        }));
        records.push(Record::Facsimile(FacsimileRecord {
            fragment_id: t.fragment_id.clone(),
            image_ref: t.facsimile_ref.clone(),
            paired_rubbing: Some(t.fragment_id.clone()),
            origin: FacsimileOrigin::HandDrawn,
        }));
        for c in &t.characters {
            let crop_ref = format!("crops/{}-{:02}.png", t.fragment_id, c.reading_index);
            let region = single_crop_region(&c.bbox, &item.rubbing.bounds());
            images.insert(crop_ref.clone(), item.rubbing.crop(&region)?);
            records.push(Record::Character(CharacterInstance {
                instance_id: format!("{}#{}", t.fragment_id, c.reading_index),
                fragment_id: t.fragment_id.clone(),
                bbox: c.bbox,
                reading_index: c.reading_index,
                glyph_class: Some(GlyphClassId::new(c.class_id.clone())?),
                crop_ref,
                descriptor: None,
            }));
        }
        records.push(Record::Interpretation(InterpretationRecord {
            fragment_id: t.fragment_id.clone(),
            text: t.interpretation.clone(),
            aligned_readings: Some(
                t.characters
                    .iter()
                    .map(|c| AlignedReading {
                        reading_index: c.reading_index,
                        modern_reading: reading_token(&c.class_id),
                    })
                    .collect(),
            ),
            source: INTERPRETATION_SOURCE.into(),
        }));
    }

    for d in 0..config.n_documents {
        for part in 0..2 {
            let k = d * 2 + part;
            let linked: BTreeSet<usize> = [k % config.n_classes, (k + 3) % config.n_classes].into();
            let names: Vec<String> = linked.iter().map(|&c| reading_token(&class_id(c))).collect();
            records.push(Record::Document(DocumentChunk {
                doc_id: format!("DOC-{:02}", d + 1),
                chunk_id: format!("p{}", part + 1),
                text: format!(
                    "Study {} part {}: the graphs {} appear together in divination records; \
                     the author compares their variant forms and proposes readings.",
                    d + 1,
                    part + 1,
                    names.join(" and ")
                ),
                linked_classes: linked
                    .iter()
                    .map(|&c| GlyphClassId::new(class_id(c)))
                    .collect::<Result<_>>()?,
                image_refs: Vec::new(),
            }));
        }
    }

    for c in &classes {
        let plates: Vec<String> = c
            .fragments
            .iter()
            .map(|f| f.as_str().trim_start_matches("SYN-").to_string())
            .collect();
        let recorded = if plates.is_empty() {
            "not yet recorded in any catalogue plate".to_string()
        } else {
            format!("recorded in the {SYNTH_CATALOG}, plates {}", plates.join(", "))
        };
        records.push(Record::Dictionary(DictionaryEntry {
            class_id: c.class_id.clone(),
            entries: vec![
                DictionarySense {
                    source: "Synthetic Compendium".into(),
                    text: format!("{}: {recorded}.", c.modern_reading),
                },
                DictionarySense {
                    source: "Variant Form Index".into(),
                    text: format!(
                        "{}: subclass {}-a, {} standard forms catalogued.",
                        c.modern_reading,
                        c.class_id,
                        c.standard_refs.len()
                    ),
                },
            ],
        }));
    }

    let text_chunk_count = config.n_fragments + 2 * config.n_documents + 2 * config.n_classes;
    Ok(SynthCorpus {
        records,
        images,
        ground_truth: GroundTruth {
            config: config.clone(),
            fragments: rendered.into_iter().map(|r| r.truth).collect(),
            classes,
            text_chunk_count,
        },
        bank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_counts() {
        let c = SynthConfig {
            n_fragments: 0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_corpus(&c), Err(Error::Argument(_))));
    }
}
