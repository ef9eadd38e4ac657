use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::SynthConfig;
use super::glyph::{reading_token, GlyphBank};
use super::seed::{derive_seed, rng_for};
use crate::error::{Error, Result};
use crate::imgproc::binarize;
use crate::raster::{BoundingBox, RasterImage};

/// Blank space between grid cells, as a fraction of the glyph size.
pub const CELL_GAP: f64 = 0.6;
/// Largest per-axis offset of a glyph inside its cell, as a fraction of the
/// glyph size.
pub const PLACEMENT_JITTER: f64 = 0.08;
/// Smallest canvas margin, as a fraction of the glyph size.
pub const MIN_MARGIN: f64 = 0.25;

/// Ground truth for one placed glyph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharAnnotation {
    pub reading_index: u32,
    pub class_id: String,
    /// Tight box around the glyph's ink.
    pub bbox: BoundingBox,
    pub variation_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFragment {
    pub facsimile: RasterImage,
    /// In reading order.
    pub annotations: Vec<CharAnnotation>,
    /// Space-joined reading tokens in reading order.
    pub interpretation: String,
}

/// Grid geometry for a canvas: `(columns, rows, pitch, origin_x, origin_y)`.
fn grid(config: &SynthConfig) -> (u32, u32, u32, u32, u32) {
    let g = config.glyph_size as f64;
    let gap = (g * CELL_GAP).round() as u32;
    let margin = (g * MIN_MARGIN).ceil() as u32;
    let pitch = config.glyph_size + gap;
    let fit = |len: u32| -> u32 {
        let usable = len.saturating_sub(2 * margin);
        if usable < config.glyph_size {
            0
        } else {
            (usable - config.glyph_size) / pitch + 1
        }
    };
    let (cols, rows) = (fit(config.canvas_width), fit(config.canvas_height));
    let span = |n: u32| n.saturating_sub(1) * pitch + config.glyph_size;
    let ox = (config.canvas_width.saturating_sub(span(cols))) / 2;
    let oy = (config.canvas_height.saturating_sub(span(rows))) / 2;
    (cols, rows, pitch, ox, oy)
}

/// Number of glyph slots the configured canvas offers.
pub fn slot_capacity(config: &SynthConfig) -> usize {
    let (c, r, ..) = grid(config);
    (c * r) as usize
}

/// Places glyphs on a grid with bounded jitter.
///
/// Reading order runs down each column, columns from right to left.
pub fn render_fragment(config: &SynthConfig, bank: &GlyphBank, fragment_seed: u64) -> Result<RenderedFragment> {
    if bank.is_empty() {
        return Err(Error::argument("glyph bank has no classes"));
    }
    let mut rng = rng_for(fragment_seed, "layout", 0);
    let (lo, hi) = config.chars_per_fragment;
    let n = rng.random_range(lo..=hi);
    let (cols, rows, pitch, ox, oy) = grid(config);
    let capacity = (cols * rows) as usize;
    if n > capacity {
        return Err(Error::argument(format!(
            "a {}x{} canvas holds {capacity} glyphs of size {}, {n} requested",
            config.canvas_width, config.canvas_height, config.glyph_size
        )));
    }
    let mut slots: Vec<(u32, u32)> = sample(&mut rng, capacity, n)
        .into_iter()
        .map(|i| (i as u32 % cols, i as u32 / cols))
        .collect();
    slots.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let classes: Vec<&str> = bank.class_ids().collect();
    let jitter = (config.glyph_size as f64 * PLACEMENT_JITTER).floor() as i64;
    let mut canvas = RasterImage::filled(config.canvas_width, config.canvas_height, 255);
    let mut annotations = Vec::with_capacity(n);
    for (reading_index, (col, row)) in slots.into_iter().enumerate() {
        let class_id = classes[rng.random_range(0..classes.len())];
        let variation_seed = derive_seed(fragment_seed, "glyph", reading_index as u64);
        let glyph = bank.generate_glyph(class_id, variation_seed, config.glyph_size)?;
        let x = (ox + col * pitch) as i64 + rng.random_range(-jitter..=jitter);
        let y = (oy + row * pitch) as i64 + rng.random_range(-jitter..=jitter);
        let (x, y) = (x.max(0) as u32, y.max(0) as u32);
        stamp_dark(&mut canvas, &glyph, x, y);
        let ink = binarize(&glyph)
            .ink_bounds()
            .expect("rendered glyphs always carry ink");
        annotations.push(CharAnnotation {
            reading_index: reading_index as u32,
            class_id: class_id.to_string(),
            bbox: BoundingBox::new(ink.xmin + x, ink.ymin + y, ink.xmax + x, ink.ymax + y)?,
            variation_seed,
        });
    }
    let interpretation = annotations
        .iter()
        .map(|a| reading_token(&a.class_id))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(RenderedFragment {
        facsimile: canvas,
        annotations,
        interpretation,
    })
}

fn stamp_dark(canvas: &mut RasterImage, glyph: &RasterImage, x: u32, y: u32) {
    for gy in 0..glyph.height() {
        for gx in 0..glyph.width() {
            let (cx, cy) = (x + gx, y + gy);
            if cx < canvas.width() && cy < canvas.height() {
                let v = glyph.get(gx, gy).min(canvas.get(cx, cy));
                canvas.set(cx, cy, v);
            }
        }
    }
}

/// Region cut around a glyph box for single-character crops: the box grown
/// by 15% of its longer side on every edge, clipped to the image.
pub fn single_crop_region(bbox: &BoundingBox, bounds: &BoundingBox) -> BoundingBox {
    let margin = ((bbox.width().max(bbox.height()) as f64) * 0.15).ceil() as u32;
    bbox.expanded(margin.max(2), bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxes_disjoint_and_ordered() {
        let config = SynthConfig::default();
        let bank = GlyphBank::generate(config.seed, config.n_classes);
        for seed in 0..20 {
            let f = render_fragment(&config, &bank, seed).unwrap();
            let a = &f.annotations;
            assert_eq!(f.interpretation.split(' ').count(), a.len());
            for (i, x) in a.iter().enumerate() {
                assert_eq!(x.reading_index as usize, i);
                assert!(f.facsimile.bounds().contains_box(&x.bbox));
                for y in &a[i + 1..] {
                    assert!(x.bbox.intersect(&y.bbox).is_none());
                }
            }
        }
    }

    #[test]
    fn too_small_canvas_is_argument_error() {
        let config = SynthConfig {
            canvas_width: 60,
            canvas_height: 60,
            chars_per_fragment: (3, 3),
            ..SynthConfig::default()
        };
        let bank = GlyphBank::generate(1, 3);
        assert!(matches!(
            render_fragment(&config, &bank, 0),
            Err(Error::Argument(_))
        ));
    }
}
