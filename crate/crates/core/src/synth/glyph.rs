use std::collections::BTreeMap;

use rand::Rng;

use super::seed::{derive_seed, rng_for};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const MIN_STROKES: usize = 3;
pub const MAX_STROKES: usize = 7;
/// Largest per-axis displacement of a control point between variations, as
/// a fraction of the glyph canvas.
pub const MAX_JITTER: f64 = 0.05;
/// Stroke half-width as a fraction of the glyph canvas.
pub const STROKE_RADIUS: f64 = 0.05;

const FREE_MIN: f64 = 0.12;
const FREE_MAX: f64 = 0.88;
const CLAMP_MIN: f64 = 0.06;
const CLAMP_MAX: f64 = 0.94;

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
enum Anchor {
    Free(Point),
    /// Point at parameter `t` along one segment of an earlier stroke, so the
    /// glyph stays connected under jitter.
    OnStroke { stroke: usize, segment: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct StrokeSpec {
    start: Anchor,
    rest: Vec<Point>,
}

/// Seeded stroke skeleton shared by every variation of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphArchetype {
    class_id: String,
    strokes: Vec<StrokeSpec>,
}

impl GlyphArchetype {
    pub fn new(class_id: impl Into<String>, seed: u64) -> Self {
        let class_id = class_id.into();
        let mut rng = rng_for(seed, "archetype", 0);
        let free = |rng: &mut rand_chacha::ChaCha8Rng| -> Point {
            (
                rng.random_range(FREE_MIN..=FREE_MAX),
                rng.random_range(FREE_MIN..=FREE_MAX),
            )
        };
        let n = rng.random_range(MIN_STROKES..=MAX_STROKES);
        let mut strokes: Vec<StrokeSpec> = Vec::with_capacity(n);
        for i in 0..n {
            let start = if i == 0 {
                Anchor::Free(free(&mut rng))
            } else {
                let stroke = rng.random_range(0..i);
                let segments = strokes[stroke].rest.len();
                Anchor::OnStroke {
                    stroke,
                    segment: rng.random_range(0..segments),
                    t: rng.random_range(0.0..=1.0),
                }
            };
            let extra = rng.random_range(1..=2);
            let rest = (0..extra).map(|_| free(&mut rng)).collect();
            strokes.push(StrokeSpec { start, rest });
        }
        Self { class_id, strokes }
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn stroke_count(&self) -> usize {
        self.strokes.len()
    }

    /// Concrete polylines for one variation; `None` gives the undistorted
    /// skeleton.
    pub fn polylines(&self, variation: Option<u64>) -> Vec<Vec<Point>> {
        let mut rng = variation.map(|v| rng_for(v, "variation", 0));
        let mut jitter = |p: Point| -> Point {
            match rng.as_mut() {
                None => p,
                Some(r) => (
                    (p.0 + r.random_range(-MAX_JITTER..=MAX_JITTER)).clamp(CLAMP_MIN, CLAMP_MAX),
                    (p.1 + r.random_range(-MAX_JITTER..=MAX_JITTER)).clamp(CLAMP_MIN, CLAMP_MAX),
                ),
            }
        };
        let mut out: Vec<Vec<Point>> = Vec::with_capacity(self.strokes.len());
        for s in &self.strokes {
            let start = match &s.start {
                Anchor::Free(p) => jitter(*p),
                Anchor::OnStroke { stroke, segment, t } => {
                    let line = &out[*stroke];
                    let (a, b) = (line[*segment], line[*segment + 1]);
                    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
                }
            };
            let mut line = vec![start];
            line.extend(s.rest.iter().map(|p| jitter(*p)));
            out.push(line);
        }
        out
    }

    /// Clean glyph, dark strokes on white, on a `size`×`size` canvas.
    pub fn render(&self, variation: Option<u64>, size: u32) -> RasterImage {
        render_polylines(&self.polylines(variation), size, STROKE_RADIUS)
    }
}

/// Rasterises polylines given in unit coordinates: a pixel is ink when its
/// centre lies within `radius` (unit fraction) of any segment.
pub fn render_polylines(lines: &[Vec<Point>], size: u32, radius: f64) -> RasterImage {
    let mut img = RasterImage::filled(size, size, 255);
    let s = size as f64;
    let r = radius * s;
    for line in lines {
        for w in line.windows(2) {
            let (ax, ay) = (w[0].0 * s, w[0].1 * s);
            let (bx, by) = (w[1].0 * s, w[1].1 * s);
            let x0 = (ax.min(bx) - r).floor().max(0.0) as u32;
            let x1 = ((ax.max(bx) + r).ceil() as u32).min(size);
            let y0 = (ay.min(by) - r).floor().max(0.0) as u32;
            let y1 = ((ay.max(by) + r).ceil() as u32).min(size);
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = segment_distance((x as f64 + 0.5, y as f64 + 0.5), (ax, ay), (bx, by));
                    if d <= r {
                        img.set(x, y, 0);
                    }
                }
            }
        }
    }
    img
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Registered archetypes of one synthetic script, keyed by class id.
#[derive(Debug, Clone, Default)]
pub struct GlyphBank {
    archetypes: BTreeMap<String, GlyphArchetype>,
}

impl GlyphBank {
    /// Classes `C00`, `C01`, ... with archetypes seeded from `master`.
    pub fn generate(master: u64, n_classes: usize) -> Self {
        let mut bank = Self::default();
        for i in 0..n_classes {
            let id = class_id(i);
            bank.register(GlyphArchetype::new(id, derive_seed(master, "class", i as u64)));
        }
        bank
    }

    pub fn register(&mut self, archetype: GlyphArchetype) {
        self.archetypes.insert(archetype.class_id.clone(), archetype);
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &str> {
        self.archetypes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.archetypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.archetypes.is_empty()
    }

    pub fn archetype(&self, class_id: &str) -> Option<&GlyphArchetype> {
        self.archetypes.get(class_id)
    }

    pub fn generate_glyph(&self, class_id: &str, variation_seed: u64, size: u32) -> Result<RasterImage> {
        let a = self
            .archetype(class_id)
            .ok_or_else(|| Error::not_found("class", class_id))?;
        Ok(a.render(Some(variation_seed), size))
    }
}

pub fn class_id(index: usize) -> String {
    format!("C{index:02}")
}

/// Placeholder modern reading of a synthetic class.
pub fn reading_token(class_id: &str) -> String {
    format!("token-{class_id}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archetypes_are_connected_and_bounded() {
        for seed in 0..50 {
            let a = GlyphArchetype::new("C00", seed);
            assert!((MIN_STROKES..=MAX_STROKES).contains(&a.stroke_count()));
            let img = a.render(Some(seed * 3 + 1), 64);
            let mask = crate::imgproc::binarize(&img);
            assert_eq!(crate::imgproc::connected_components(&mask).len(), 1);
        }
    }

    #[test]
    fn jitter_is_bounded() {
        let a = GlyphArchetype::new("C01", 3);
        let base = a.polylines(None);
        let var = a.polylines(Some(99));
        for (l0, l1) in base.iter().zip(&var) {
            // Anchored starts are convex combinations of jittered points.
            for (p, q) in l0.iter().zip(l1) {
                assert!((p.0 - q.0).abs() <= MAX_JITTER + 1e-9);
                assert!((p.1 - q.1).abs() <= MAX_JITTER + 1e-9);
            }
        }
    }

    #[test]
    fn unknown_class_is_not_found() {
        let bank = GlyphBank::generate(1, 2);
        assert!(bank.generate_glyph("C05", 0, 32).is_err());
        assert_eq!(bank.class_ids().collect::<Vec<_>>(), ["C00", "C01"]);
    }
}
