//! On-disk snapshot format.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/glyph_classes.jsonl   rubbings.jsonl   facsimiles.jsonl   characters.jsonl
//! <dir>/interpretations.jsonl documents.jsonl  dictionary.jsonl
//! <dir>/images/<image key>    (8-bit grayscale PNG)
//! ```
//!
//! Each JSONL file holds one record per line in ascending key order. The
//! manifest records the SHA-256 of every JSONL file's bytes and one SHA-256
//! over all decoded images (for each key in ascending order: key bytes, a
//! zero byte, width and height as little-endian u32, then the pixels).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ingest::{DirImages, KbBuilder};
use super::records::*;
use super::snapshot::KbSnapshot;
use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const FORMAT_NAME: &str = "scriptorium-kb";
pub const FORMAT_VERSION: u32 = 1;
pub const CHECKSUM_ALGORITHM: &str = "sha256";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub format_version: u32,
    pub checksum_algorithm: String,
    /// Record count per store file, plus `images`.
    pub counts: BTreeMap<String, usize>,
    /// JSONL file name to hex digest.
    pub files: BTreeMap<String, String>,
    pub images_sha256: String,
}

impl KbSnapshot {
    /// Manifest of the snapshot as it would be written by [`save_snapshot`].
    pub fn manifest(&self) -> Manifest {
        let files = store_files(self);
        Manifest {
            format: FORMAT_NAME.into(),
            format_version: FORMAT_VERSION,
            checksum_algorithm: CHECKSUM_ALGORITHM.into(),
            counts: files
                .iter()
                .map(|(name, (n, _))| (stem(name).to_string(), *n))
                .chain([("images".to_string(), self.images().len())])
                .collect(),
            files: files
                .iter()
                .map(|(name, (_, bytes))| (name.to_string(), hex::encode(Sha256::digest(bytes))))
                .collect(),
            images_sha256: images_digest(self.images()),
        }
    }
}

fn stem(name: &str) -> &str {
    name.trim_end_matches(".jsonl")
}

fn jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> (usize, Vec<u8>) {
    let mut out = Vec::new();
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialise");
        out.push(b'\n');
        n += 1;
    }
    (n, out)
}

fn store_files(kb: &KbSnapshot) -> BTreeMap<&'static str, (usize, Vec<u8>)> {
    let s = kb.stores();
    BTreeMap::from([
        ("glyph_classes.jsonl", jsonl(s.glyph_classes.values())),
        ("rubbings.jsonl", jsonl(s.rubbings.values())),
        ("facsimiles.jsonl", jsonl(s.facsimiles.values())),
        ("characters.jsonl", jsonl(s.characters.values())),
        ("interpretations.jsonl", jsonl(s.interpretations.values())),
        ("documents.jsonl", jsonl(s.documents.values())),
        ("dictionary.jsonl", jsonl(s.dictionary.values())),
    ])
}

fn images_digest(images: &BTreeMap<String, RasterImage>) -> String {
    let mut h = Sha256::new();
    for (key, img) in images {
        h.update(key.as_bytes());
        h.update([0u8]);
        h.update(img.width().to_le_bytes());
        h.update(img.height().to_le_bytes());
        h.update(img.pixels());
    }
    hex::encode(h.finalize())
}

/// Writes the snapshot to `dir` (created if needed) and returns its manifest.
pub fn save_snapshot(kb: &KbSnapshot, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, (_, bytes)) in store_files(kb) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    for (key, img) in kb.images() {
        let path = dir.join(IMAGES_DIR).join(key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, img.to_png()).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = kb.manifest();
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads, verifies and re-indexes a snapshot written by [`save_snapshot`].
pub fn load_snapshot(dir: &Path) -> Result<KbSnapshot> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::UnsupportedFormat(format!("manifest.json: {e}")))?;
    if manifest.format != FORMAT_NAME || manifest.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "{} v{} (expected {FORMAT_NAME} v{FORMAT_VERSION})",
            manifest.format, manifest.format_version
        )));
    }
    if manifest.checksum_algorithm != CHECKSUM_ALGORITHM {
        return Err(Error::UnsupportedFormat(format!(
            "checksum algorithm {}",
            manifest.checksum_algorithm
        )));
    }

    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for (name, digest) in &manifest.files {
        if name.contains('/') || name.contains('\\') {
            return Err(Error::Corruption(format!("bad file name {name}")));
        }
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::Corruption(format!("{name}: {e}")))?;
        if hex::encode(Sha256::digest(&bytes)) != *digest {
            return Err(Error::Corruption(format!("checksum mismatch in {name}")));
        }
        files.insert(name.clone(), bytes);
    }

    let mut records: Vec<Record> = Vec::new();
    parse_into(&files, "glyph_classes.jsonl", &mut records, Record::GlyphClass)?;
    parse_into(&files, "rubbings.jsonl", &mut records, Record::Rubbing)?;
    parse_into(&files, "facsimiles.jsonl", &mut records, Record::Facsimile)?;
    parse_into(&files, "characters.jsonl", &mut records, Record::Character)?;
    parse_into(&files, "interpretations.jsonl", &mut records, Record::Interpretation)?;
    parse_into(&files, "documents.jsonl", &mut records, Record::Document)?;
    parse_into(&files, "dictionary.jsonl", &mut records, Record::Dictionary)?;

    let mut builder = KbBuilder::new();
    let source = DirImages::new(dir.join(IMAGES_DIR));
    for report in builder.ingest_all(records, &source) {
        if let Some(r) = report.rejected.first() {
            return Err(Error::Corruption(format!(
                "{} rejected on load: {} ({})",
                r.key, r.reason, r.detail
            )));
        }
    }
    let kb = builder.build_indexes();
    let actual = kb.manifest();
    if actual.counts != manifest.counts {
        return Err(Error::Corruption("record counts differ from manifest".into()));
    }
    if actual.images_sha256 != manifest.images_sha256 {
        return Err(Error::Corruption("image content differs from manifest".into()));
    }
    Ok(kb)
}

/// Store files in load order.
const PAYLOAD_FILES: [&str; 7] = [
    "glyph_classes.jsonl",
    "rubbings.jsonl",
    "facsimiles.jsonl",
    "characters.jsonl",
    "interpretations.jsonl",
    "documents.jsonl",
    "dictionary.jsonl",
];

/// Reads the record files present in a payload directory laid out like a
/// snapshot, without a manifest. Missing files count as empty stores.
///
/// Malformed lines are argument errors: records must at least parse before
/// ingestion can validate them.
pub fn read_payload(dir: &Path) -> Result<Vec<Record>> {
    if !dir.is_dir() {
        return Err(Error::argument(format!("{} is not a directory", dir.display())));
    }
    let mut files = BTreeMap::new();
    for name in PAYLOAD_FILES {
        let path = dir.join(name);
        match fs::read(&path) {
            Ok(bytes) => {
                files.insert(name.to_string(), bytes);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                files.insert(name.to_string(), Vec::new());
            }
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    let mut records = Vec::new();
    let parsed = parse_into(&files, PAYLOAD_FILES[0], &mut records, Record::GlyphClass)
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[1], &mut records, Record::Rubbing))
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[2], &mut records, Record::Facsimile))
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[3], &mut records, Record::Character))
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[4], &mut records, Record::Interpretation))
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[5], &mut records, Record::Document))
        .and_then(|_| parse_into(&files, PAYLOAD_FILES[6], &mut records, Record::Dictionary));
    match parsed {
        Ok(()) => Ok(records),
        Err(Error::Corruption(msg)) => Err(Error::Argument(msg)),
        Err(e) => Err(e),
    }
}

/// Ingests a payload directory (see [`read_payload`]) with images under
/// `<dir>/images`.
pub fn ingest_dir(dir: &Path) -> Result<(KbBuilder, Vec<super::IngestReport>)> {
    let records = read_payload(dir)?;
    let mut builder = KbBuilder::new();
    let reports = builder.ingest_all(records, &DirImages::new(dir.join(IMAGES_DIR)));
    Ok((builder, reports))
}

fn parse_into<T: DeserializeOwned>(
    files: &BTreeMap<String, Vec<u8>>,
    name: &str,
    out: &mut Vec<Record>,
    wrap: fn(T) -> Record,
) -> Result<()> {
    let bytes = files
        .get(name)
        .ok_or_else(|| Error::Corruption(format!("manifest does not list {name}")))?;
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Corruption(format!("{name}: {e}")))?;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line)
            .map_err(|e| Error::Corruption(format!("{name}:{}: {e}", line_no + 1)))?;
        out.push(wrap(rec));
    }
    Ok(())
}
