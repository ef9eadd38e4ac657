use rand::Rng;
use serde::{Deserialize, Serialize};

use super::seed::rng_for;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    None,
    Low,
    High,
}

impl NoiseLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(NoiseLevel::None),
            "low" => Some(NoiseLevel::Low),
            "high" => Some(NoiseLevel::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::Low => "low",
            NoiseLevel::High => "high",
        }
    }

    /// Frozen parameters of each level. `None` is handled as an exact
    /// inversion and has no parameters.
    pub fn params(self) -> Option<NoiseParams> {
        match self {
            NoiseLevel::None => None,
            NoiseLevel::Low => Some(NoiseParams {
                background: 28,
                ink: 225,
                texture_amplitude: 12,
                speckle_density: 0.0015,
                speckle_value: 215,
                cracks: (1, 2),
                crack_value: 90,
                crack_width: 1,
            }),
            NoiseLevel::High => Some(NoiseParams {
                background: 45,
                ink: 205,
                texture_amplitude: 30,
                speckle_density: 0.006,
                speckle_value: 235,
                cracks: (3, 5),
                crack_value: 200,
                crack_width: 2,
            }),
        }
    }
}

impl std::fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseParams {
    /// Mean gray level of the rubbing sheet.
    pub background: u8,
    /// Gray level of fully inked glyph strokes.
    pub ink: u8,
    /// Peak deviation of the smooth surface texture.
    pub texture_amplitude: u8,
    /// Fraction of pixels hit by a bright speckle.
    pub speckle_density: f64,
    pub speckle_value: u8,
    /// Inclusive range of crack count.
    pub cracks: (u32, u32),
    pub crack_value: u8,
    pub crack_width: u32,
}

/// Texture lattice spacing in pixels.
const TEXTURE_CELL: u32 = 16;
const CRACK_SEGMENTS: u32 = 8;

/// Turns a facsimile (dark on light) into a synthetic rubbing (light on dark).
///
/// The clean mapping is `bg + (ink - bg) * (1 - p / 255)` plus a bilinear
/// value-noise texture; then cracks and single-pixel speckle are drawn on top.
/// `NoiseLevel::None` returns the exact inversion `255 - p`.
pub fn render_rubbing(facsimile: &RasterImage, level: NoiseLevel, seed: u64) -> RasterImage {
    let Some(p) = level.params() else {
        return facsimile.inverted();
    };
    let mut rng = rng_for(seed, "rubbing", 0);
    let (w, h) = (facsimile.width(), facsimile.height());
    let texture = value_noise(&mut rng, w, h, p.texture_amplitude as f64);
    let mut out = RasterImage::filled(w, h, 0);
    for y in 0..h {
        for x in 0..w {
            let darkness = 1.0 - facsimile.get(x, y) as f64 / 255.0;
            let base = p.background as f64 + (p.ink as f64 - p.background as f64) * darkness;
            let t = texture[(y * w + x) as usize];
            out.set(x, y, (base + t).round().clamp(0.0, 255.0) as u8);
        }
    }
    let n_cracks = rng.random_range(p.cracks.0..=p.cracks.1);
    for _ in 0..n_cracks {
        draw_crack(&mut out, &mut rng, p.crack_value, p.crack_width);
    }
    for y in 0..h {
        for x in 0..w {
            if rng.random_bool(p.speckle_density) {
                out.set(x, y, p.speckle_value);
            }
        }
    }
    out
}

fn value_noise(rng: &mut impl Rng, w: u32, h: u32, amplitude: f64) -> Vec<f64> {
    let gw = w / TEXTURE_CELL + 2;
    let gh = h / TEXTURE_CELL + 2;
    let lattice: Vec<f64> = (0..gw * gh)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    let at = |gx: u32, gy: u32| lattice[(gy * gw + gx) as usize];
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        let gy = y / TEXTURE_CELL;
        let fy = (y % TEXTURE_CELL) as f64 / TEXTURE_CELL as f64;
        for x in 0..w {
            let gx = x / TEXTURE_CELL;
            let fx = (x % TEXTURE_CELL) as f64 / TEXTURE_CELL as f64;
            let top = at(gx, gy) * (1.0 - fx) + at(gx + 1, gy) * fx;
            let bottom = at(gx, gy + 1) * (1.0 - fx) + at(gx + 1, gy + 1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// A wandering polyline between two random points on opposite edges.
fn draw_crack(img: &mut RasterImage, rng: &mut impl Rng, value: u8, width: u32) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let horizontal = rng.random_bool(0.5);
    let (start, end) = if horizontal {
        ((0.0, rng.random_range(0.0..h)), (w, rng.random_range(0.0..h)))
    } else {
        ((rng.random_range(0.0..w), 0.0), (rng.random_range(0.0..w), h))
    };
    let wobble = 0.06 * w.min(h);
    let mut prev = start;
    for i in 1..=CRACK_SEGMENTS {
        let t = i as f64 / CRACK_SEGMENTS as f64;
        let mut next = (
            start.0 + (end.0 - start.0) * t,
            start.1 + (end.1 - start.1) * t,
        );
        if i < CRACK_SEGMENTS {
            next.0 += rng.random_range(-wobble..=wobble);
            next.1 += rng.random_range(-wobble..=wobble);
        }
        draw_line(img, prev, next, value, width);
        prev = next;
    }
}

fn draw_line(img: &mut RasterImage, a: (f64, f64), b: (f64, f64), value: u8, width: u32) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as u32).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a.0 + (b.0 - a.0) * t).floor() as i64;
        let y = (a.1 + (b.1 - a.1) * t).floor() as i64;
        for dy in 0..width as i64 {
            for dx in 0..width as i64 {
                let (px, py) = (x + dx, y + dy);
                if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                    img.set(px as u32, py as u32, value);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RasterImage {
        let mut img = RasterImage::filled(64, 48, 255);
        for y in 10..30 {
            for x in 20..26 {
                img.set(x, y, 0);
            }
        }
        img
    }

    #[test]
    fn none_is_exact_inversion() {
        let f = sample();
        let r = render_rubbing(&f, NoiseLevel::None, 1);
        for (a, b) in f.pixels().iter().zip(r.pixels()) {
            assert_eq!(*b, 255 - *a);
        }
    }

    #[test]
    fn noisy_levels_are_darker_and_seeded() {
        let f = sample();
        for level in [NoiseLevel::Low, NoiseLevel::High] {
            let a = render_rubbing(&f, level, 5);
            assert!(a.mean() < f.mean());
            assert_eq!(a, render_rubbing(&f, level, 5));
            assert_ne!(a, render_rubbing(&f, level, 6));
        }
    }
}
