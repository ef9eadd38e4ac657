//! The five cross-referenced knowledge stores: validating ingestion,
//! frozen indexed snapshots and the on-disk snapshot format.

mod disk;
mod ingest;
mod records;
mod snapshot;

pub use disk::{
    ingest_dir, load_snapshot, read_payload, save_snapshot, Manifest, CHECKSUM_ALGORITHM, FORMAT_NAME, FORMAT_VERSION,
    IMAGES_DIR, MANIFEST_FILE,
};
pub use ingest::{
    validate_image_key, DirImages, ImageSource, IngestReport, KbBuilder, MemoryImages,
    RejectReason, Rejection, Stores,
};
pub use records::*;
pub use snapshot::{FragmentBundle, KbSnapshot};
