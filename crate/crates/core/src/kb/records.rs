//! Record types for the five knowledge stores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BoundingBox;
use crate::vision::VisualDescriptor;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self> {
                let value = value.into();
                if value.trim().is_empty() {
                    return Err(Error::argument(concat!($what, " must be non-empty")));
                }
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Catalog identifier of one excavated fragment; every store keys on it.
    FragmentId,
    "fragment id"
);
string_id!(
    /// Identity of a distinct character (glyph class).
    GlyphClassId,
    "glyph class id"
);

/// Where an image came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub catalog: String,
    pub plate: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubbingRecord {
    pub fragment_id: FragmentId,
    pub image_ref: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FacsimileOrigin {
    HandDrawn,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacsimileRecord {
    pub fragment_id: FragmentId,
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_rubbing: Option<FragmentId>,
    pub origin: FacsimileOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterInstance {
    pub instance_id: String,
    pub fragment_id: FragmentId,
    pub bbox: BoundingBox,
    pub reading_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glyph_class: Option<GlyphClassId>,
    pub crop_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<VisualDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphClassEntry {
    pub class_id: GlyphClassId,
    pub subclass_id: String,
    /// Modern character, or a placeholder token; treated as opaque.
    pub modern_reading: String,
    pub standard_image_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedReading {
    pub reading_index: u32,
    pub modern_reading: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretationRecord {
    pub fragment_id: FragmentId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aligned_readings: Option<Vec<AlignedReading>>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_id: String,
    pub text: String,
    #[serde(default)]
    pub linked_classes: Vec<GlyphClassId>,
    #[serde(default)]
    pub image_refs: Vec<String>,
}

/// One scholar's (or source's) reading of a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySense {
    pub source: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub class_id: GlyphClassId,
    pub entries: Vec<DictionarySense>,
}

/// The five stores of the knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreKind {
    /// Standard glyph images indexed by class and subclass.
    GlyphIndex,
    /// Fragment interpretation texts.
    Interpretations,
    /// Rubbings, facsimiles and per-character crops.
    ImagePairs,
    Documents,
    Dictionary,
}

impl StoreKind {
    pub const ALL: [StoreKind; 5] = [
        StoreKind::GlyphIndex,
        StoreKind::ImagePairs,
        StoreKind::Interpretations,
        StoreKind::Documents,
        StoreKind::Dictionary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StoreKind::GlyphIndex => "glyph-index",
            StoreKind::Interpretations => "interpretations",
            StoreKind::ImagePairs => "image-pairs",
            StoreKind::Documents => "documents",
            StoreKind::Dictionary => "dictionary",
        }
    }
}

/// Any ingestable record, tagged by `kind` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Record {
    Rubbing(RubbingRecord),
    Facsimile(FacsimileRecord),
    Character(CharacterInstance),
    GlyphClass(GlyphClassEntry),
    Interpretation(InterpretationRecord),
    Document(DocumentChunk),
    Dictionary(DictionaryEntry),
}

impl Record {
    pub fn store(&self) -> StoreKind {
        match self {
            Record::Rubbing(_) | Record::Facsimile(_) | Record::Character(_) => {
                StoreKind::ImagePairs
            }
            Record::GlyphClass(_) => StoreKind::GlyphIndex,
            Record::Interpretation(_) => StoreKind::Interpretations,
            Record::Document(_) => StoreKind::Documents,
            Record::Dictionary(_) => StoreKind::Dictionary,
        }
    }

    /// Human-readable primary key.
    pub fn key(&self) -> String {
        match self {
            Record::Rubbing(r) => format!("rubbing:{}", r.fragment_id),
            Record::Facsimile(r) => format!("facsimile:{}", r.fragment_id),
            Record::Character(r) => format!("character:{}", r.instance_id),
            Record::GlyphClass(r) => format!("glyph:{}/{}", r.class_id, r.subclass_id),
            Record::Interpretation(r) => format!("interpretation:{}/{}", r.fragment_id, r.source),
            Record::Document(r) => format!("document:{}/{}", r.doc_id, r.chunk_id),
            Record::Dictionary(r) => format!("dictionary:{}", r.class_id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_reject_empty() {
        assert!(FragmentId::new("").is_err());
        assert!(FragmentId::new("  ").is_err());
        assert!(serde_json::from_str::<FragmentId>("\"\"").is_err());
        assert_eq!(FragmentId::new("H-1").unwrap().as_str(), "H-1");
    }

    #[test]
    fn record_wire_shape() {
        let r = Record::Rubbing(RubbingRecord {
            fragment_id: FragmentId::new("F1").unwrap(),
            image_ref: "rubbings/F1.png".into(),
            provenance: Provenance {
                catalog: "Heji".into(),
                plate: "1".into(),
            },
        });
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["kind"], "rubbing");
        assert_eq!(v["fragment_id"], "F1");
        let back: Record = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
