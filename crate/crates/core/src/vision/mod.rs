//! Deterministic vision tools: modality classification, character
//! detection, glyph/rubbing retrieval, denoising and facsimile generation.
//!
//! Each tool also accepts an [`ExternalModelClient`] override through
//! [`VisionTools`]; when the external call fails or returns an unusable
//! payload the built-in pipeline answers instead.

mod denoise;
mod descriptor;
mod detect;
mod external;
mod modality;
mod retrieval;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use denoise::{denoise_character, generate_facsimile, CROP_MARGIN, DESPECKLE_FRACTION};
pub use descriptor::{
    encode_glyph, encode_image, encode_mask, ink_density_grid, normalize_glyph,
    normalize_glyph_mask, orientation_histogram, VisualDescriptor, DENSITY_DIMS,
    DESCRIPTOR_DIMS, GLYPH_CANVAS, GRID, ORIENTATION_BINS, ORIENTATION_WEIGHT,
};
pub use detect::{detect_characters, Detection, MERGE_GAP_FACTOR, MIN_COMPONENT_AREA};
pub use external::{ExternalModelClient, ExternalRequest, ExternalResponse, HttpModelClient};
pub use modality::{classify_modality, Modality, SINGLE_MIN_COVERAGE};
pub use retrieval::{
    classify_descriptor, classify_glyph, glyph_descriptor, retrieve_glyphs, retrieve_rubbings,
    whole_image_descriptor, ClassVote, DescriptorIndex, GlyphClassification, IndexEntry,
    RankedHit, RubbingHit, CLASSIFY_NEIGHBOURS,
};

use crate::raster::RasterImage;

/// Operations that an external model may take over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VisionOp {
    ClassifyModality,
    DetectCharacters,
    DenoiseCharacter,
    GenerateFacsimile,
}

impl VisionOp {
    pub fn tool_name(self) -> &'static str {
        match self {
            VisionOp::ClassifyModality => "classify_modality",
            VisionOp::DetectCharacters => "detect_characters",
            VisionOp::DenoiseCharacter => "denoise_character",
            VisionOp::GenerateFacsimile => "generate_facsimile",
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            VisionOp::ClassifyModality => "Which modality is this oracle bone image?",
            VisionOp::DetectCharacters => "Return a bounding box for every character.",
            VisionOp::DenoiseCharacter => "Denoise this single character into a facsimile.",
            VisionOp::GenerateFacsimile => "Please transform this picture into a facsimile.",
        }
    }
}

/// Vision tool set with optional per-operation external overrides.
#[derive(Clone, Default)]
pub struct VisionTools {
    overrides: BTreeMap<VisionOp, Arc<dyn ExternalModelClient>>,
}

impl std::fmt::Debug for VisionTools {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VisionTools")
            .field("overrides", &self.overrides.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl VisionTools {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_override(mut self, op: VisionOp, client: Arc<dyn ExternalModelClient>) -> Self {
        self.overrides.insert(op, client);
        self
    }

    fn external(&self, op: VisionOp, image: &RasterImage) -> Option<ExternalResponse> {
        let client = self.overrides.get(&op)?;
        client
            .invoke(&ExternalRequest {
                tool: op.tool_name().into(),
                instruction: op.instruction().into(),
                images: vec![image.clone()],
            })
            .ok()
    }

    pub fn classify_modality(&self, image: &RasterImage) -> (Modality, f64) {
        if let Some(ExternalResponse::Label { label, confidence }) =
            self.external(VisionOp::ClassifyModality, image)
        {
            if let Some(m) = Modality::parse(&label) {
                return (m, confidence);
            }
        }
        classify_modality(image)
    }

    pub fn detect_characters(&self, image: &RasterImage) -> Vec<Detection> {
        if let Some(ExternalResponse::Detections(mut dets)) =
            self.external(VisionOp::DetectCharacters, image)
        {
            let bounds = image.bounds();
            if dets.iter().all(|d| bounds.contains_box(&d.bbox)) {
                dets.sort_by_key(|d| (d.bbox.ymin, d.bbox.xmin, d.bbox.ymax, d.bbox.xmax));
                return dets;
            }
        }
        detect_characters(image)
    }

    pub fn denoise_character(&self, crop: &RasterImage) -> RasterImage {
        self.same_size_image(VisionOp::DenoiseCharacter, crop)
            .unwrap_or_else(|| denoise_character(crop))
    }

    pub fn generate_facsimile(&self, rubbing: &RasterImage) -> RasterImage {
        self.same_size_image(VisionOp::GenerateFacsimile, rubbing)
            .unwrap_or_else(|| generate_facsimile(rubbing))
    }

    fn same_size_image(&self, op: VisionOp, input: &RasterImage) -> Option<RasterImage> {
        match self.external(op, input)? {
            ExternalResponse::Image(img)
                if img.width() == input.width() && img.height() == input.height() =>
            {
                Some(img)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::{Error, Result};

    struct Fixed(Option<ExternalResponse>);

    impl ExternalModelClient for Fixed {
        fn invoke(&self, _: &ExternalRequest) -> Result<ExternalResponse> {
            self.0.clone().ok_or_else(|| Error::External("offline".into()))
        }
    }

    #[test]
    fn override_used_when_valid() {
        let img = RasterImage::filled(8, 8, 255);
        let tools = VisionTools::new().with_override(
            VisionOp::GenerateFacsimile,
            Arc::new(Fixed(Some(ExternalResponse::Image(RasterImage::filled(8, 8, 7))))),
        );
        assert_eq!(tools.generate_facsimile(&img).get(0, 0), 7);
    }

    #[test]
    fn falls_back_on_failure_or_bad_shape() {
        let img = RasterImage::filled(8, 8, 0);
        let down = VisionTools::new()
            .with_override(VisionOp::GenerateFacsimile, Arc::new(Fixed(None)));
        assert_eq!(down.generate_facsimile(&img), generate_facsimile(&img));
        let wrong = VisionTools::new().with_override(
            VisionOp::DenoiseCharacter,
            Arc::new(Fixed(Some(ExternalResponse::Image(RasterImage::filled(3, 3, 0))))),
        );
        assert_eq!(wrong.denoise_character(&img), denoise_character(&img));
    }
}
