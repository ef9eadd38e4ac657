use crate::imgproc::binarize;
use crate::raster::{BoundingBox, RasterImage};

use super::detect::detect_characters;

/// Components below this fraction of the crop area are removed as speckle.
pub const DESPECKLE_FRACTION: f64 = 0.01;

/// Turns a single-character crop (either polarity) into a clean facsimile:
/// binarise, drop speckle, then open and close with the 4-neighbour cross.
/// Ink comes out as `0` on a `255` ground.
pub fn denoise_character(crop: &RasterImage) -> RasterImage {
    let mask = binarize(crop);
    let min_area = ((crop.len() as f64 * DESPECKLE_FRACTION).ceil() as usize).max(1);
    mask.without_small_components(min_area)
        .open_cross()
        .close_cross()
        .to_raster()
}

/// Margin added around each detection before denoising, so strokes touching
/// the box edge survive the morphology.
pub const CROP_MARGIN: u32 = 2;

/// Whole-image facsimile: detect characters, denoise each crop and composite
/// the ink onto a white canvas of the input's size.
pub fn generate_facsimile(rubbing: &RasterImage) -> RasterImage {
    let mut canvas = RasterImage::filled(rubbing.width(), rubbing.height(), 255);
    let bounds = rubbing.bounds();
    for det in detect_characters(rubbing) {
        let region = det.bbox.expanded(CROP_MARGIN, &bounds);
        let crop = rubbing.crop(&region).expect("detections lie inside the image");
        let clean = denoise_character(&crop);
        stamp_ink(&mut canvas, &clean, &region);
    }
    canvas
}

fn stamp_ink(canvas: &mut RasterImage, glyph: &RasterImage, at: &BoundingBox) {
    for y in 0..glyph.height() {
        for x in 0..glyph.width() {
            if glyph.get(x, y) == 0 {
                canvas.set(at.xmin + x, at.ymin + y, 0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_crop_is_white() {
        let out = denoise_character(&RasterImage::filled(30, 30, 0));
        assert!(out.pixels().iter().all(|&p| p == 255));
    }

    #[test]
    fn blank_rubbing_gives_white_canvas() {
        let out = generate_facsimile(&RasterImage::filled(50, 40, 0));
        assert_eq!((out.width(), out.height()), (50, 40));
        assert!(out.pixels().iter().all(|&p| p == 255));
    }

    #[test]
    fn inverts_rubbing_polarity_and_drops_speckle() {
        let mut crop = RasterImage::filled(40, 40, 20);
        for y in 10..30 {
            for x in 15..22 {
                crop.set(x, y, 240);
            }
        }
        crop.set(2, 2, 240);
        let out = denoise_character(&crop);
        assert_eq!(out.get(18, 20), 0);
        assert_eq!(out.get(2, 2), 255);
        assert_eq!(out.get(5, 35), 255);
    }
}
