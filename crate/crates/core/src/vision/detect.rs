//! Classical character detector: polarity normalisation, Otsu binarisation,
//! 3x3 closing, connected components, then single-linkage clustering of
//! components into character boxes.

use serde::{Deserialize, Serialize};

use crate::imgproc::{binarize, connected_components, Component};
use crate::raster::{BoundingBox, RasterImage};

/// Components closer than this fraction of the median component height are
/// merged into one character.
pub const MERGE_GAP_FACTOR: f64 = 0.4;

/// Components smaller than this (in pixels) are treated as speckle.
pub const MIN_COMPONENT_AREA: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Ink mass of the cluster relative to the heaviest cluster in the image.
    pub score: f64,
}

/// Detects character boxes on a whole rubbing or facsimile. Output is sorted
/// by `(ymin, xmin)`; a blank image yields no detections.
pub fn detect_characters(image: &RasterImage) -> Vec<Detection> {
    let mask = binarize(image).close();
    let comps: Vec<Component> = connected_components(&mask)
        .into_iter()
        .filter(|c| c.area >= MIN_COMPONENT_AREA)
        .collect();
    cluster_components(&comps)
}

pub(crate) fn cluster_components(comps: &[Component]) -> Vec<Detection> {
    if comps.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<u32> = comps.iter().map(|c| c.bbox.height()).collect();
    heights.sort_unstable();
    let median = heights[(heights.len() - 1) / 2] as f64;
    let threshold = MERGE_GAP_FACTOR * median;

    let mut parent: Vec<usize> = (0..comps.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if (comps[i].bbox.gap(&comps[j].bbox) as f64) < threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut clusters: std::collections::BTreeMap<usize, (BoundingBox, usize)> = Default::default();
    for (i, c) in comps.iter().enumerate() {
        let root = find(&mut parent, i);
        clusters
            .entry(root)
            .and_modify(|(b, a)| {
                *b = b.union(&c.bbox);
                *a += c.area;
            })
            .or_insert((c.bbox, c.area));
    }
    let heaviest = clusters.values().map(|(_, a)| *a).max().unwrap_or(1) as f64;
    let mut out: Vec<Detection> = clusters
        .into_values()
        .map(|(bbox, area)| Detection {
            bbox,
            score: area as f64 / heaviest,
        })
        .collect();
    out.sort_by_key(|d| (d.bbox.ymin, d.bbox.xmin, d.bbox.ymax, d.bbox.xmax));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(img: &mut RasterImage, x0: u32, y0: u32, w: u32, h: u32) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.set(x, y, 0);
            }
        }
    }

    #[test]
    fn blank_gives_nothing() {
        assert!(detect_characters(&RasterImage::filled(64, 64, 0)).is_empty());
        assert!(detect_characters(&RasterImage::filled(64, 64, 255)).is_empty());
    }

    #[test]
    fn nearby_parts_merge_distant_ones_do_not() {
        let mut img = RasterImage::filled(200, 100, 255);
        // Two strokes 4px apart (height 20 -> threshold 8): one character.
        blob(&mut img, 10, 10, 6, 20);
        blob(&mut img, 20, 10, 6, 20);
        // A third stroke far away.
        blob(&mut img, 120, 40, 6, 20);
        let dets = detect_characters(&img);
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].bbox, BoundingBox::new(10, 10, 26, 30).unwrap());
        assert_eq!(dets[1].bbox, BoundingBox::new(120, 40, 126, 60).unwrap());
        assert_eq!(dets[0].score, 1.0);
        assert!((dets[1].score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn specks_are_ignored() {
        let mut img = RasterImage::filled(100, 100, 255);
        blob(&mut img, 30, 30, 10, 30);
        blob(&mut img, 80, 80, 2, 2);
        let dets = detect_characters(&img);
        assert_eq!(dets.len(), 1);
    }

    #[test]
    fn rubbing_polarity_is_handled() {
        let mut img = RasterImage::filled(100, 100, 255);
        blob(&mut img, 30, 30, 10, 30);
        let a = detect_characters(&img);
        let b = detect_characters(&img.inverted());
        assert_eq!(a, b);
    }
}
