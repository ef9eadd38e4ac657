//! Validating ingestion into a writable snapshot.
//!
//! Invalid records never abort a batch; they are reported with a
//! machine-readable reason and skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::records::*;
use crate::raster::RasterImage;

/// Resolves image path keys to rasters during ingestion.
pub trait ImageSource {
    fn load(&self, key: &str) -> Result<RasterImage, String>;
}

/// In-memory image source.
#[derive(Debug, Default, Clone)]
pub struct MemoryImages(pub HashMap<String, RasterImage>);

impl ImageSource for MemoryImages {
    fn load(&self, key: &str) -> Result<RasterImage, String> {
        self.0
            .get(key)
            .cloned()
            .ok_or_else(|| format!("no image named {key}"))
    }
}

impl ImageSource for BTreeMap<String, RasterImage> {
    fn load(&self, key: &str) -> Result<RasterImage, String> {
        self.get(key)
            .cloned()
            .ok_or_else(|| format!("no image named {key}"))
    }
}

/// Reads PNG files below a root directory.
#[derive(Debug, Clone)]
pub struct DirImages {
    root: PathBuf,
}

impl DirImages {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl ImageSource for DirImages {
    fn load(&self, key: &str) -> Result<RasterImage, String> {
        validate_image_key(key)?;
        let path = self.root.join(key);
        let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        RasterImage::from_png(&bytes).map_err(|e| e.to_string())
    }
}

/// Image keys are relative slash-separated paths without `..` segments.
pub fn validate_image_key(key: &str) -> Result<(), String> {
    let ok_chars = key
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '/'));
    if key.is_empty()
        || !ok_chars
        || key.starts_with('/')
        || key.split('/').any(|seg| seg.is_empty() || seg == "." || seg == "..")
    {
        return Err(format!("invalid image key {key:?}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    DegenerateBbox,
    BboxOutOfBounds,
    DuplicateKey,
    DuplicateReadingIndex,
    DanglingReference,
    UnreadableImage,
    InvalidField,
    WrongStore,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::DegenerateBbox => "degenerate bbox",
            RejectReason::BboxOutOfBounds => "bbox out of bounds",
            RejectReason::DuplicateKey => "duplicate primary key",
            RejectReason::DuplicateReadingIndex => "duplicate reading index",
            RejectReason::DanglingReference => "dangling reference",
            RejectReason::UnreadableImage => "unreadable image",
            RejectReason::InvalidField => "invalid field",
            RejectReason::WrongStore => "record belongs to another store",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position of the record in the ingested batch.
    pub index: usize,
    pub key: String,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub store: StoreKind,
    pub accepted: usize,
    /// Records identical to ones already present.
    pub unchanged: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }
}

/// Record sets of the five stores, in canonical key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stores {
    pub rubbings: BTreeMap<FragmentId, RubbingRecord>,
    pub facsimiles: BTreeMap<FragmentId, FacsimileRecord>,
    pub characters: BTreeMap<String, CharacterInstance>,
    pub glyph_classes: BTreeMap<(GlyphClassId, String), GlyphClassEntry>,
    pub interpretations: BTreeMap<(FragmentId, String), InterpretationRecord>,
    pub documents: BTreeMap<(String, String), DocumentChunk>,
    pub dictionary: BTreeMap<GlyphClassId, DictionaryEntry>,
}

impl Stores {
    pub fn has_class(&self, class: &GlyphClassId) -> bool {
        self.glyph_classes
            .range((class.clone(), String::new())..)
            .next()
            .is_some_and(|((c, _), _)| c == class)
    }

    pub fn has_fragment(&self, id: &FragmentId) -> bool {
        self.rubbings.contains_key(id) || self.facsimiles.contains_key(id)
    }
}

/// A snapshot opened for writing. Call [`KbBuilder::build_indexes`] to
/// freeze it into a queryable [`super::KbSnapshot`].
#[derive(Debug, Clone, Default)]
pub struct KbBuilder {
    pub(crate) stores: Stores,
    pub(crate) images: BTreeMap<String, RasterImage>,
}

type Check = Result<(), (RejectReason, String)>;

fn reject<T>(reason: RejectReason, detail: impl Into<String>) -> Result<T, (RejectReason, String)> {
    Err((reason, detail.into()))
}

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stores(&self) -> &Stores {
        &self.stores
    }

    pub fn images(&self) -> &BTreeMap<String, RasterImage> {
        &self.images
    }

    /// Validates and stores each record of `records` belonging to `store`.
    pub fn ingest_store(
        &mut self,
        store: StoreKind,
        records: impl IntoIterator<Item = Record>,
        images: &dyn ImageSource,
    ) -> IngestReport {
        let mut report = IngestReport {
            store,
            accepted: 0,
            unchanged: 0,
            rejected: Vec::new(),
        };
        for (index, record) in records.into_iter().enumerate() {
            let key = record.key();
            if record.store() != store {
                report.rejected.push(Rejection {
                    index,
                    key,
                    reason: RejectReason::WrongStore,
                    detail: format!("expected {}, got {}", store.name(), record.store().name()),
                });
                continue;
            }
            match self.insert(record, images) {
                Ok(true) => report.accepted += 1,
                Ok(false) => report.unchanged += 1,
                Err((reason, detail)) => report.rejected.push(Rejection {
                    index,
                    key,
                    reason,
                    detail,
                }),
            }
        }
        report
    }

    /// Ingests a mixed batch store by store in dependency order.
    pub fn ingest_all(
        &mut self,
        records: impl IntoIterator<Item = Record>,
        images: &dyn ImageSource,
    ) -> Vec<IngestReport> {
        let mut by_store: BTreeMap<StoreKind, Vec<Record>> = BTreeMap::new();
        for r in records {
            by_store.entry(r.store()).or_default().push(r);
        }
        StoreKind::ALL
            .iter()
            .map(|&kind| {
                let mut batch = by_store.remove(&kind).unwrap_or_default();
                if kind == StoreKind::ImagePairs {
                    // Rubbings before facsimiles before characters.
                    batch.sort_by_key(|r| match r {
                        Record::Rubbing(_) => 0,
                        Record::Facsimile(_) => 1,
                        _ => 2,
                    });
                }
                self.ingest_store(kind, batch, images)
            })
            .collect()
    }

    /// Returns `Ok(true)` when stored, `Ok(false)` when an identical record
    /// was already present.
    fn insert(&mut self, record: Record, images: &dyn ImageSource) -> Result<bool, (RejectReason, String)> {
        match record {
            Record::Rubbing(r) => {
                if let Some(existing) = self.stores.rubbings.get(&r.fragment_id) {
                    return same_or_duplicate(existing == &r, &r.fragment_id);
                }
                if r.provenance.catalog.trim().is_empty() || r.provenance.plate.trim().is_empty() {
                    return reject(RejectReason::InvalidField, "provenance must be non-empty");
                }
                self.resolve_image(&r.image_ref, images)?;
                self.stores.rubbings.insert(r.fragment_id.clone(), r);
            }
            Record::Facsimile(r) => {
                if let Some(existing) = self.stores.facsimiles.get(&r.fragment_id) {
                    return same_or_duplicate(existing == &r, &r.fragment_id);
                }
                if let Some(paired) = &r.paired_rubbing {
                    if !self.stores.rubbings.contains_key(paired) {
                        return reject(
                            RejectReason::DanglingReference,
                            format!("paired rubbing {paired} is not in the rubbing store"),
                        );
                    }
                }
                self.resolve_image(&r.image_ref, images)?;
                self.stores.facsimiles.insert(r.fragment_id.clone(), r);
            }
            Record::Character(r) => {
                if let Some(existing) = self.stores.characters.get(&r.instance_id) {
                    return same_or_duplicate(existing == &r, &r.instance_id);
                }
                self.check_character(&r)?;
                self.resolve_image(&r.crop_ref, images)?;
                self.stores.characters.insert(r.instance_id.clone(), r);
            }
            Record::GlyphClass(r) => {
                let key = (r.class_id.clone(), r.subclass_id.clone());
                if let Some(existing) = self.stores.glyph_classes.get(&key) {
                    return same_or_duplicate(existing == &r, &format!("{}/{}", key.0, key.1));
                }
                if r.subclass_id.trim().is_empty() {
                    return reject(RejectReason::InvalidField, "subclass_id must be non-empty");
                }
                if r.standard_image_refs.is_empty() {
                    return reject(RejectReason::InvalidField, "at least one standard image is required");
                }
                for img in &r.standard_image_refs {
                    self.resolve_image(img, images)?;
                }
                self.stores.glyph_classes.insert(key, r);
            }
            Record::Interpretation(r) => {
                let key = (r.fragment_id.clone(), r.source.clone());
                if let Some(existing) = self.stores.interpretations.get(&key) {
                    return same_or_duplicate(existing == &r, &format!("{}/{}", key.0, key.1));
                }
                if r.source.trim().is_empty() {
                    return reject(RejectReason::InvalidField, "source must be non-empty");
                }
                if !self.stores.has_fragment(&r.fragment_id) {
                    return reject(
                        RejectReason::DanglingReference,
                        format!("fragment {} is unknown", r.fragment_id),
                    );
                }
                if let Some(aligned) = &r.aligned_readings {
                    let present: BTreeSet<u32> = self
                        .stores
                        .characters
                        .values()
                        .filter(|c| c.fragment_id == r.fragment_id)
                        .map(|c| c.reading_index)
                        .collect();
                    if let Some(missing) = aligned.iter().find(|a| !present.contains(&a.reading_index)) {
                        return reject(
                            RejectReason::DanglingReference,
                            format!(
                                "reading index {} does not exist on fragment {}",
                                missing.reading_index, r.fragment_id
                            ),
                        );
                    }
                }
                self.stores.interpretations.insert(key, r);
            }
            Record::Document(r) => {
                let key = (r.doc_id.clone(), r.chunk_id.clone());
                if let Some(existing) = self.stores.documents.get(&key) {
                    return same_or_duplicate(existing == &r, &format!("{}/{}", key.0, key.1));
                }
                if r.doc_id.trim().is_empty() || r.chunk_id.trim().is_empty() {
                    return reject(RejectReason::InvalidField, "doc_id and chunk_id must be non-empty");
                }
                if r.text.trim().is_empty() {
                    return reject(RejectReason::InvalidField, "chunk text must be non-empty");
                }
                if let Some(c) = r.linked_classes.iter().find(|c| !self.stores.has_class(c)) {
                    return reject(RejectReason::DanglingReference, format!("glyph class {c} is unknown"));
                }
                for img in &r.image_refs {
                    self.resolve_image(img, images)?;
                }
                self.stores.documents.insert(key, r);
            }
            Record::Dictionary(r) => {
                if let Some(existing) = self.stores.dictionary.get(&r.class_id) {
                    return same_or_duplicate(existing == &r, &r.class_id);
                }
                if r.entries.is_empty() {
                    return reject(RejectReason::InvalidField, "dictionary entry needs at least one sense");
                }
                if !self.stores.has_class(&r.class_id) {
                    return reject(
                        RejectReason::DanglingReference,
                        format!("glyph class {} is unknown", r.class_id),
                    );
                }
                self.stores.dictionary.insert(r.class_id.clone(), r);
            }
        }
        Ok(true)
    }

    fn check_character(&self, r: &CharacterInstance) -> Check {
        if r.instance_id.trim().is_empty() {
            return reject(RejectReason::InvalidField, "instance_id must be non-empty");
        }
        if r.bbox.is_degenerate() {
            return reject(RejectReason::DegenerateBbox, format!("bbox {} has no area", r.bbox));
        }
        let parent_ref = self
            .stores
            .rubbings
            .get(&r.fragment_id)
            .map(|p| &p.image_ref)
            .or_else(|| self.stores.facsimiles.get(&r.fragment_id).map(|p| &p.image_ref))
            .ok_or_else(|| {
                (
                    RejectReason::DanglingReference,
                    format!("fragment {} has no rubbing or facsimile", r.fragment_id),
                )
            })?;
        let parent = self.images.get(parent_ref).expect("parent image stored at ingest");
        if !parent.bounds().contains_box(&r.bbox) {
            return reject(
                RejectReason::BboxOutOfBounds,
                format!(
                    "bbox {} exceeds {}x{} parent image",
                    r.bbox,
                    parent.width(),
                    parent.height()
                ),
            );
        }
        if let Some(class) = &r.glyph_class {
            if !self.stores.has_class(class) {
                return reject(RejectReason::DanglingReference, format!("glyph class {class} is unknown"));
            }
        }
        if let Some(d) = &r.descriptor {
            let n = d.norm();
            if !(d.is_zero() || (n - 1.0).abs() <= 1e-6) {
                return reject(RejectReason::InvalidField, "descriptor is not unit-normalised");
            }
        }
        let clash = self
            .stores
            .characters
            .values()
            .any(|c| c.fragment_id == r.fragment_id && c.reading_index == r.reading_index);
        if clash {
            return reject(
                RejectReason::DuplicateReadingIndex,
                format!("reading index {} already used on {}", r.reading_index, r.fragment_id),
            );
        }
        Ok(())
    }

    fn resolve_image(&mut self, key: &str, source: &dyn ImageSource) -> Check {
        validate_image_key(key).map_err(|e| (RejectReason::InvalidField, e))?;
        if self.images.contains_key(key) {
            return Ok(());
        }
        let img = source
            .load(key)
            .map_err(|e| (RejectReason::UnreadableImage, e))?;
        self.images.insert(key.to_string(), img);
        Ok(())
    }
}

fn same_or_duplicate(identical: bool, key: &dyn std::fmt::Display) -> Result<bool, (RejectReason, String)> {
    if identical {
        Ok(false)
    } else {
        reject(
            RejectReason::DuplicateKey,
            format!("a different record with key {key} already exists"),
        )
    }
}
