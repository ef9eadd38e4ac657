use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ingest::{KbBuilder, Stores};
use super::records::*;
use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::text::{SourceRef, TextChunk, TextIndex};
use crate::vision::{glyph_descriptor, whole_image_descriptor, DescriptorIndex, IndexEntry};

/// Everything the knowledge base holds about one fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentBundle {
    pub fragment_id: FragmentId,
    pub rubbing: Option<RubbingRecord>,
    pub facsimile: Option<FacsimileRecord>,
    /// Ascending reading order.
    pub characters: Vec<CharacterInstance>,
    pub interpretations: Vec<InterpretationRecord>,
    /// Chunks linked to any glyph class occurring on the fragment.
    pub documents: Vec<DocumentChunk>,
}

/// Frozen, indexed knowledge base. Cheap to clone.
#[derive(Debug, Clone)]
pub struct KbSnapshot {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    stores: Stores,
    images: BTreeMap<String, RasterImage>,
    fragment_chars: BTreeMap<FragmentId, Vec<String>>,
    fragment_interps: BTreeMap<FragmentId, Vec<(FragmentId, String)>>,
    class_instances: BTreeMap<GlyphClassId, Vec<String>>,
    class_documents: BTreeMap<GlyphClassId, Vec<(String, String)>>,
    text_index: TextIndex,
    rubbing_index: DescriptorIndex,
    standard_index: DescriptorIndex,
    instance_index: DescriptorIndex,
}

impl KbBuilder {
    /// Freezes the stores and builds every secondary index.
    pub fn build_indexes(self) -> KbSnapshot {
        KbSnapshot::from_parts(self.stores, self.images)
    }
}

impl Default for KbSnapshot {
    fn default() -> Self {
        KbBuilder::new().build_indexes()
    }
}

impl KbSnapshot {
    fn from_parts(stores: Stores, images: BTreeMap<String, RasterImage>) -> Self {
        let mut fragment_chars: BTreeMap<FragmentId, Vec<(u32, String)>> = BTreeMap::new();
        let mut class_instances: BTreeMap<GlyphClassId, Vec<String>> = BTreeMap::new();
        for c in stores.characters.values() {
            fragment_chars
                .entry(c.fragment_id.clone())
                .or_default()
                .push((c.reading_index, c.instance_id.clone()));
            if let Some(class) = &c.glyph_class {
                class_instances
                    .entry(class.clone())
                    .or_default()
                    .push(c.instance_id.clone());
            }
        }
        let fragment_chars = fragment_chars
            .into_iter()
            .map(|(f, mut v)| {
                v.sort();
                (f, v.into_iter().map(|(_, id)| id).collect())
            })
            .collect();

        let mut fragment_interps: BTreeMap<FragmentId, Vec<(FragmentId, String)>> = BTreeMap::new();
        for key in stores.interpretations.keys() {
            fragment_interps.entry(key.0.clone()).or_default().push(key.clone());
        }

        let mut class_documents: BTreeMap<GlyphClassId, Vec<(String, String)>> = BTreeMap::new();
        for (key, doc) in &stores.documents {
            for class in doc.linked_classes.iter().collect::<BTreeSet<_>>() {
                class_documents.entry(class.clone()).or_default().push(key.clone());
            }
        }

        let text_index = TextIndex::build(text_chunks(&stores));

        let image = |key: &str| images.get(key).expect("ingested image refs resolve");
        let rubbing_index = DescriptorIndex::new(
            stores
                .rubbings
                .values()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|r| IndexEntry {
                    id: r.fragment_id.to_string(),
                    label: None,
                    descriptor: whole_image_descriptor(image(&r.image_ref)),
                })
                .collect::<Vec<_>>(),
        );
        let standards: Vec<(String, String)> = stores
            .glyph_classes
            .values()
            .flat_map(|g| {
                g.standard_image_refs
                    .iter()
                    .map(move |r| (r.clone(), g.class_id.to_string()))
            })
            .collect::<BTreeMap<_, _>>()
            .into_iter()
            .collect();
        let standard_index = DescriptorIndex::new(
            standards
                .par_iter()
                .map(|(key, class)| IndexEntry {
                    id: key.clone(),
                    label: Some(class.clone()),
                    descriptor: glyph_descriptor(image(key)),
                })
                .collect::<Vec<_>>(),
        );
        let instance_index = DescriptorIndex::new(
            stores
                .characters
                .values()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|c| IndexEntry {
                    id: c.instance_id.clone(),
                    label: c.glyph_class.as_ref().map(|g| g.to_string()),
                    descriptor: c
                        .descriptor
                        .clone()
                        .unwrap_or_else(|| glyph_descriptor(image(&c.crop_ref))),
                })
                .collect::<Vec<_>>(),
        );

        KbSnapshot {
            inner: Arc::new(Inner {
                stores,
                images,
                fragment_chars,
                fragment_interps,
                class_instances,
                class_documents,
                text_index,
                rubbing_index,
                standard_index,
                instance_index,
            }),
        }
    }

    pub fn stores(&self) -> &Stores {
        &self.inner.stores
    }

    pub fn images(&self) -> &BTreeMap<String, RasterImage> {
        &self.inner.images
    }

    pub fn image(&self, key: &str) -> Option<&RasterImage> {
        self.inner.images.get(key)
    }

    pub fn text_index(&self) -> &TextIndex {
        &self.inner.text_index
    }

    /// Whole-image descriptors of rubbings, keyed by fragment id.
    pub fn rubbing_index(&self) -> &DescriptorIndex {
        &self.inner.rubbing_index
    }

    /// Standard glyph images keyed by image ref and labelled with their class.
    pub fn standard_index(&self) -> &DescriptorIndex {
        &self.inner.standard_index
    }

    /// Character instances keyed by instance id and labelled with their class.
    pub fn instance_index(&self) -> &DescriptorIndex {
        &self.inner.instance_index
    }

    pub fn fragment_ids(&self) -> Vec<FragmentId> {
        let s = &self.inner.stores;
        s.rubbings
            .keys()
            .chain(s.facsimiles.keys())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn lookup_fragment(&self, id: &FragmentId) -> Result<FragmentBundle> {
        let s = &self.inner.stores;
        if !s.has_fragment(id) {
            return Err(Error::not_found("fragment", id.as_str()));
        }
        let characters: Vec<CharacterInstance> = self
            .inner
            .fragment_chars
            .get(id)
            .map(|ids| ids.iter().map(|i| s.characters[i].clone()).collect())
            .unwrap_or_default();
        let interpretations = self
            .inner
            .fragment_interps
            .get(id)
            .map(|keys| keys.iter().map(|k| s.interpretations[k].clone()).collect())
            .unwrap_or_default();
        let doc_keys: BTreeSet<&(String, String)> = characters
            .iter()
            .filter_map(|c| c.glyph_class.as_ref())
            .filter_map(|class| self.inner.class_documents.get(class))
            .flatten()
            .collect();
        Ok(FragmentBundle {
            fragment_id: id.clone(),
            rubbing: s.rubbings.get(id).cloned(),
            facsimile: s.facsimiles.get(id).cloned(),
            characters,
            interpretations,
            documents: doc_keys.into_iter().map(|k| s.documents[k].clone()).collect(),
        })
    }

    pub fn character(&self, instance_id: &str) -> Option<&CharacterInstance> {
        self.inner.stores.characters.get(instance_id)
    }

    /// Instances of a class in instance-id order.
    pub fn class_instances(&self, class: &GlyphClassId) -> Vec<&CharacterInstance> {
        self.inner
            .class_instances
            .get(class)
            .map(|ids| ids.iter().map(|i| &self.inner.stores.characters[i]).collect())
            .unwrap_or_default()
    }

    /// All subclass entries of a class.
    pub fn glyph_class(&self, class: &GlyphClassId) -> Vec<&GlyphClassEntry> {
        self.inner
            .stores
            .glyph_classes
            .range((class.clone(), String::new())..)
            .take_while(|((c, _), _)| c == class)
            .map(|(_, e)| e)
            .collect()
    }

    pub fn class_ids(&self) -> Vec<GlyphClassId> {
        self.inner
            .stores
            .glyph_classes
            .keys()
            .map(|(c, _)| c.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn dictionary_entry(&self, class: &GlyphClassId) -> Option<&DictionaryEntry> {
        self.inner.stores.dictionary.get(class)
    }

    pub fn documents_for_class(&self, class: &GlyphClassId) -> Vec<&DocumentChunk> {
        self.inner
            .class_documents
            .get(class)
            .map(|keys| keys.iter().map(|k| &self.inner.stores.documents[k]).collect())
            .unwrap_or_default()
    }

    /// Every record, store by store in ingestion order, each store in key order.
    pub fn records(&self) -> Vec<Record> {
        let s = &self.inner.stores;
        let mut out = Vec::new();
        out.extend(s.glyph_classes.values().cloned().map(Record::GlyphClass));
        out.extend(s.rubbings.values().cloned().map(Record::Rubbing));
        out.extend(s.facsimiles.values().cloned().map(Record::Facsimile));
        out.extend(s.characters.values().cloned().map(Record::Character));
        out.extend(s.interpretations.values().cloned().map(Record::Interpretation));
        out.extend(s.documents.values().cloned().map(Record::Document));
        out.extend(s.dictionary.values().cloned().map(Record::Dictionary));
        out
    }

    /// SHA-256 of each secondary index's canonical JSON form.
    pub fn index_checksums(&self) -> BTreeMap<&'static str, String> {
        let i = &self.inner;
        let mut out = BTreeMap::new();
        out.insert("fragments", json_sha256(&(&i.fragment_chars, &i.fragment_interps)));
        out.insert("classes", json_sha256(&(&i.class_instances, &i.class_documents)));
        out.insert("text", json_sha256(&i.text_index));
        out.insert(
            "descriptors",
            json_sha256(&(&i.rubbing_index, &i.standard_index, &i.instance_index)),
        );
        out
    }

    /// Resolves every cross-reference; returns one message per failure.
    pub fn verify_integrity(&self) -> Vec<String> {
        let s = &self.inner.stores;
        let mut problems = Vec::new();
        let mut image = |what: &str, key: &str| {
            if !self.inner.images.contains_key(key) {
                problems.push(format!("{what}: image {key} missing"));
            }
        };
        for r in s.rubbings.values() {
            image(&format!("rubbing {}", r.fragment_id), &r.image_ref);
        }
        for r in s.facsimiles.values() {
            image(&format!("facsimile {}", r.fragment_id), &r.image_ref);
        }
        for c in s.characters.values() {
            image(&format!("character {}", c.instance_id), &c.crop_ref);
        }
        for g in s.glyph_classes.values() {
            for r in &g.standard_image_refs {
                image(&format!("glyph {}", g.class_id), r);
            }
        }
        for d in s.documents.values() {
            for r in &d.image_refs {
                image(&format!("document {}/{}", d.doc_id, d.chunk_id), r);
            }
        }
        for r in s.facsimiles.values() {
            if let Some(p) = &r.paired_rubbing {
                if !s.rubbings.contains_key(p) {
                    problems.push(format!("facsimile {}: paired rubbing {p} missing", r.fragment_id));
                }
            }
        }
        for c in s.characters.values() {
            if !s.has_fragment(&c.fragment_id) {
                problems.push(format!("character {}: fragment {} missing", c.instance_id, c.fragment_id));
            }
            if let Some(g) = &c.glyph_class {
                if !s.has_class(g) {
                    problems.push(format!("character {}: class {g} missing", c.instance_id));
                }
            }
        }
        for r in s.interpretations.values() {
            if !s.has_fragment(&r.fragment_id) {
                problems.push(format!("interpretation {}: fragment missing", r.fragment_id));
            }
        }
        for d in s.documents.values() {
            for g in &d.linked_classes {
                if !s.has_class(g) {
                    problems.push(format!("document {}/{}: class {g} missing", d.doc_id, d.chunk_id));
                }
            }
        }
        for d in s.dictionary.values() {
            if !s.has_class(&d.class_id) {
                problems.push(format!("dictionary {}: class missing", d.class_id));
            }
        }
        problems
    }
}

pub(crate) fn json_sha256<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("index types serialise");
    hex::encode(Sha256::digest(&bytes))
}

/// Chunk ids are `interp:<fragment>:<source>`, `doc:<doc>:<chunk>` and
/// `dict:<class>:<n>`.
fn text_chunks(stores: &Stores) -> Vec<TextChunk> {
    let mut out = Vec::new();
    for r in stores.interpretations.values() {
        out.push(TextChunk {
            chunk_id: format!("interp:{}:{}", r.fragment_id, r.source),
            text: r.text.clone(),
            source: SourceRef::Interpretation {
                fragment_id: r.fragment_id.clone(),
                source: r.source.clone(),
            },
        });
    }
    for d in stores.documents.values() {
        out.push(TextChunk {
            chunk_id: format!("doc:{}:{}", d.doc_id, d.chunk_id),
            text: d.text.clone(),
            source: SourceRef::Document {
                doc_id: d.doc_id.clone(),
                chunk_id: d.chunk_id.clone(),
            },
        });
    }
    for e in stores.dictionary.values() {
        for (n, sense) in e.entries.iter().enumerate() {
            out.push(TextChunk {
                chunk_id: format!("dict:{}:{n}", e.class_id),
                text: sense.text.clone(),
                source: SourceRef::Dictionary {
                    class_id: e.class_id.clone(),
                    sense: n,
                },
            });
        }
    }
    out
}
