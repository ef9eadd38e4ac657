//! Deterministic synthetic corpora with ground truth by construction.
//!
//! Glyph classes are seeded stroke skeletons, fragments place glyph
//! variations on a jittered grid, and rubbings invert and dirty the
//! facsimile with frozen per-level noise parameters ([`NoiseLevel::params`]).

mod corpus;
mod fragment;
mod glyph;
mod modality_set;
mod rubbing;
mod seed;

pub use corpus::{
    generate_corpus, ClassTruth, FragmentTruth, GroundTruth, SynthConfig, SynthCorpus,
    GROUND_TRUTH_FILE, INTERPRETATION_SOURCE, SYNTH_CATALOG,
};
pub use fragment::{
    render_fragment, single_crop_region, slot_capacity, CharAnnotation, RenderedFragment,
    CELL_GAP, MIN_MARGIN, PLACEMENT_JITTER,
};
pub use glyph::{
    class_id, reading_token, render_polylines, GlyphArchetype, GlyphBank, Point, MAX_JITTER,
    MAX_STROKES, MIN_STROKES, STROKE_RADIUS,
};
pub use modality_set::{generate_modality_set, LabeledImage};
pub use rubbing::{render_rubbing, NoiseLevel, NoiseParams};
pub use seed::{derive_seed, fnv1a64, rng_for, splitmix64};
