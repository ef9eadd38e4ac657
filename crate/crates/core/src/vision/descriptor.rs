//! Fixed-length visual descriptor: a 16x16 ink-density grid followed by a
//! 64-bin gradient-orientation histogram, jointly unit-normalised.
//!
//! Both blocks are computed from the binarised ink mask, so the descriptor is
//! a function of the mask alone: any intensity change that leaves the Otsu
//! split unchanged (for instance adding a small constant to every pixel)
//! leaves the descriptor unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{binarize, InkMask};
use crate::raster::RasterImage;

pub const GRID: usize = 16;
pub const DENSITY_DIMS: usize = GRID * GRID;
pub const ORIENTATION_BINS: usize = 64;
pub const DESCRIPTOR_DIMS: usize = DENSITY_DIMS + ORIENTATION_BINS;

/// Relative weight of the orientation block after per-block normalisation.
pub const ORIENTATION_WEIGHT: f32 = 0.5;

/// Side of the canonical glyph canvas produced by [`normalize_glyph`].
pub const GLYPH_CANVAS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct VisualDescriptor {
    values: Vec<f32>,
}

impl VisualDescriptor {
    pub fn zero() -> Self {
        Self {
            values: vec![0.0; DESCRIPTOR_DIMS],
        }
    }

    /// Wraps raw values, unit-normalising them. Zero vectors stay zero.
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIMS {
            return Err(Error::argument(format!(
                "descriptor must have {DESCRIPTOR_DIMS} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("descriptor values must be finite"));
        }
        let mut d = Self { values };
        d.normalize();
        Ok(d)
    }

    fn normalize(&mut self) {
        let norm = l2(&self.values);
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f32 {
        l2(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Cosine similarity; zero when either side is the zero descriptor.
    pub fn cosine(&self, other: &VisualDescriptor) -> f32 {
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum();
        let na = l2(&self.values) as f64;
        let nb = l2(&other.values) as f64;
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na * nb)) as f32
        }
    }

    /// Density block (first 256 values, post-normalisation).
    pub fn density_block(&self) -> &[f32] {
        &self.values[..DENSITY_DIMS]
    }

    pub fn orientation_block(&self) -> &[f32] {
        &self.values[DENSITY_DIMS..]
    }

    /// Little-endian bytes, used for checksums.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Deserialisation path: values must already be unit-norm (or all zero) and
/// are kept bit-for-bit.
impl TryFrom<Vec<f32>> for VisualDescriptor {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIMS {
            return Err(Error::argument(format!(
                "descriptor must have {DESCRIPTOR_DIMS} values, got {}",
                values.len()
            )));
        }
        let norm = l2(&values);
        let zero = values.iter().all(|&v| v == 0.0);
        if !norm.is_finite() || !(zero || (norm - 1.0).abs() <= 1e-6) {
            return Err(Error::argument(format!(
                "descriptor norm must be 0 or 1, got {norm}"
            )));
        }
        Ok(Self { values })
    }
}

impl From<VisualDescriptor> for Vec<f32> {
    fn from(d: VisualDescriptor) -> Self {
        d.values
    }
}

fn l2(values: &[f32]) -> f32 {
    values
        .iter()
        .map(|v| *v as f64 * *v as f64)
        .sum::<f64>()
        .sqrt() as f32
}

/// Raw ink fraction per grid cell, row-major (`cell (row, col)` at
/// `row * 16 + col`), before any normalisation.
pub fn ink_density_grid(mask: &InkMask) -> [f32; DENSITY_DIMS] {
    let mut grid = [0f32; DENSITY_DIMS];
    let (w, h) = (mask.width as usize, mask.height as usize);
    for row in 0..GRID {
        let (y0, y1) = (row * h / GRID, (row + 1) * h / GRID);
        for col in 0..GRID {
            let (x0, x1) = (col * w / GRID, (col + 1) * w / GRID);
            let cells = (y1 - y0) * (x1 - x0);
            if cells == 0 {
                continue;
            }
            let ink = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .filter(|&(x, y)| mask.get(x as u32, y as u32))
                .count();
            grid[row * GRID + col] = ink as f32 / cells as f32;
        }
    }
    grid
}

/// Magnitude-weighted Sobel orientation histogram over the ink mask.
pub fn orientation_histogram(mask: &InkMask) -> [f32; ORIENTATION_BINS] {
    let mut hist = [0f64; ORIENTATION_BINS];
    let (w, h) = (mask.width, mask.height);
    if w < 3 || h < 3 {
        return [0.0; ORIENTATION_BINS];
    }
    let at = |x: u32, y: u32| if mask.get(x, y) { 1.0f64 } else { 0.0 };
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1);
            let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx) + std::f64::consts::PI;
            let bin = ((angle / std::f64::consts::TAU) * ORIENTATION_BINS as f64) as usize
                % ORIENTATION_BINS;
            hist[bin] += mag;
        }
    }
    hist.map(|v| v as f32)
}

/// Encodes an image into its [`VisualDescriptor`]. Images without ink map
/// to the all-zero descriptor.
pub fn encode_image(image: &RasterImage) -> VisualDescriptor {
    encode_mask(&binarize(image))
}

pub fn encode_mask(mask: &InkMask) -> VisualDescriptor {
    if mask.count() == 0 {
        return VisualDescriptor::zero();
    }
    let density = ink_density_grid(mask);
    let orient = orientation_histogram(mask);
    let dn = l2(&density);
    let on = l2(&orient);
    let mut values = Vec::with_capacity(DESCRIPTOR_DIMS);
    values.extend(density.iter().map(|v| if dn > 0.0 { v / dn } else { 0.0 }));
    values.extend(
        orient
            .iter()
            .map(|v| if on > 0.0 { ORIENTATION_WEIGHT * v / on } else { 0.0 }),
    );
    VisualDescriptor::from_values(values).expect("dims fixed")
}

/// Crops a single-character image to its ink, pads it to a centred square
/// with a 10% margin and resamples to a 64x64 dark-on-white canvas. Glyph
/// indexing and queries both pass through this so framing differences
/// between detector crops and reference images do not matter.
pub fn normalize_glyph(image: &RasterImage) -> RasterImage {
    normalize_glyph_mask(&binarize(image))
}

pub fn normalize_glyph_mask(mask: &InkMask) -> RasterImage {
    let Some(bounds) = mask.ink_bounds() else {
        return RasterImage::filled(GLYPH_CANVAS, GLYPH_CANVAS, 255);
    };
    let ink = mask.to_raster().crop(&bounds).expect("bounds inside mask");
    let side = bounds.width().max(bounds.height());
    let padded_side = side + (side / 5).max(2);
    let mut square = RasterImage::filled(padded_side, padded_side, 255);
    square.paste(
        &ink,
        (padded_side - bounds.width()) / 2,
        (padded_side - bounds.height()) / 2,
    );
    square.resized(GLYPH_CANVAS, GLYPH_CANVAS)
}

/// Descriptor of [`normalize_glyph`]'s output.
pub fn encode_glyph(image: &RasterImage) -> VisualDescriptor {
    encode_image(&normalize_glyph(image))
}
