//! Binary-image primitives shared by the vision tools: polarity
//! normalisation, Otsu binarisation, 3x3 morphology and connected components.

use crate::raster::{BoundingBox, RasterImage};

/// Images whose median intensity falls below this are treated as
/// light-on-dark (rubbing polarity).
pub const POLARITY_SPLIT: u8 = 128;

/// Minimum separation between Otsu class means for the image to count as
/// having any ink at all. Flat or texture-only images binarise to empty.
pub const MIN_CLASS_SEPARATION: f64 = 48.0;

/// Boolean pixel mask, `true` = ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InkMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl InkMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Tight box around all ink, if any.
    pub fn ink_bounds(&self) -> Option<BoundingBox> {
        let (mut xmin, mut ymin, mut xmax, mut ymax) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    xmin = xmin.min(x);
                    ymin = ymin.min(y);
                    xmax = xmax.max(x + 1);
                    ymax = ymax.max(y + 1);
                }
            }
        }
        (xmin != u32::MAX).then_some(BoundingBox {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Renders ink as `0` on a `255` background.
    pub fn to_raster(&self) -> RasterImage {
        let pixels = self.bits.iter().map(|&b| if b { 0 } else { 255 }).collect();
        RasterImage::new(self.width, self.height, pixels).expect("mask dims are valid")
    }

    fn neighbourhood_any(&self, x: u32, y: u32) -> bool {
        let x0 = x.saturating_sub(1);
        let y0 = y.saturating_sub(1);
        let x1 = (x + 1).min(self.width - 1);
        let y1 = (y + 1).min(self.height - 1);
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| self.get(xx, yy)))
    }

    fn neighbourhood_all(&self, x: u32, y: u32) -> bool {
        // Outside the image counts as background.
        if x == 0 || y == 0 || x + 1 >= self.width || y + 1 >= self.height {
            return false;
        }
        (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| self.get(xx, yy)))
    }

    pub fn dilate(&self) -> Self {
        let mut out = Self::empty(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.neighbourhood_any(x, y) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    pub fn erode(&self) -> Self {
        let mut out = Self::empty(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.neighbourhood_all(x, y) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    /// 3x3 closing, one iteration.
    pub fn close(&self) -> Self {
        self.dilate().erode()
    }

    /// 3x3 opening, one iteration.
    pub fn open(&self) -> Self {
        self.erode().dilate()
    }

    fn cross_any(&self, x: u32, y: u32) -> bool {
        self.get(x, y)
            || (x > 0 && self.get(x - 1, y))
            || (y > 0 && self.get(x, y - 1))
            || (x + 1 < self.width && self.get(x + 1, y))
            || (y + 1 < self.height && self.get(x, y + 1))
    }

    fn cross_all(&self, x: u32, y: u32) -> bool {
        if x == 0 || y == 0 || x + 1 >= self.width || y + 1 >= self.height {
            return false;
        }
        self.get(x, y)
            && self.get(x - 1, y)
            && self.get(x + 1, y)
            && self.get(x, y - 1)
            && self.get(x, y + 1)
    }

    fn map_pixels(&self, f: impl Fn(&Self, u32, u32) -> bool) -> Self {
        let mut out = Self::empty(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if f(self, x, y) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    /// Opening with the 4-neighbour cross. Gentler on diagonal strokes than
    /// the square element.
    pub fn open_cross(&self) -> Self {
        self.map_pixels(Self::cross_all).map_pixels(Self::cross_any)
    }

    /// Closing with the 4-neighbour cross.
    pub fn close_cross(&self) -> Self {
        self.map_pixels(Self::cross_any).map_pixels(Self::cross_all)
    }

    /// Clears every 8-connected component with fewer than `min_area` pixels.
    pub fn without_small_components(&self, min_area: usize) -> Self {
        let (labels, comps) = label_components(self);
        let mut out = self.clone();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                if comps[*l as usize].area < min_area {
                    out.bits[i] = false;
                }
            }
        }
        out
    }
}

/// Otsu threshold over a 256-bin histogram. Pixels `<= t` form the dark class.
/// Returns `None` when the histogram holds a single level.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<(u8, f64)> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();
    let mut w0 = 0u64;
    let mut sum0 = 0f64;
    let mut best: Option<(u8, f64, f64)> = None;
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, b, _)| between > b) {
            best = Some((t as u8, between, m1 - m0));
        }
    }
    best.map(|(t, _, sep)| (t, sep))
}

/// Whether the image looks light-on-dark (rubbing polarity).
pub fn is_light_on_dark(img: &RasterImage) -> bool {
    img.median() < POLARITY_SPLIT
}

/// Flips light-on-dark images so ink is always dark on a light ground.
pub fn normalize_polarity(img: &RasterImage) -> RasterImage {
    if is_light_on_dark(img) {
        img.inverted()
    } else {
        img.clone()
    }
}

/// Polarity normalisation followed by a global Otsu threshold.
pub fn binarize(img: &RasterImage) -> InkMask {
    let norm = normalize_polarity(img);
    let mut mask = InkMask::empty(img.width(), img.height());
    let Some((t, separation)) = otsu_threshold(&norm.histogram()) else {
        return mask;
    };
    if separation < MIN_CLASS_SEPARATION {
        return mask;
    }
    for (bit, &p) in mask.bits.iter_mut().zip(norm.pixels()) {
        *bit = p <= t;
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub bbox: BoundingBox,
    pub area: usize,
}

/// 8-connected components in raster-scan discovery order.
pub fn connected_components(mask: &InkMask) -> Vec<Component> {
    label_components(mask).1
}

fn label_components(mask: &InkMask) -> (Vec<Option<u32>>, Vec<Component>) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut labels: Vec<Option<u32>> = vec![None; mask.bits.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start].is_some() {
            continue;
        }
        let id = comps.len() as u32;
        let (sx, sy) = ((start as i64 % w) as u32, (start as i64 / w) as u32);
        let mut bbox = BoundingBox {
            xmin: sx,
            ymin: sy,
            xmax: sx + 1,
            ymax: sy + 1,
        };
        let mut area = 0usize;
        labels[start] = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = (i as i64 % w, i as i64 / w);
            bbox.xmin = bbox.xmin.min(x as u32);
            bbox.ymin = bbox.ymin.min(y as u32);
            bbox.xmax = bbox.xmax.max(x as u32 + 1);
            bbox.ymax = bbox.ymax.max(y as u32 + 1);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.bits[j] && labels[j].is_none() {
                        labels[j] = Some(id);
                        stack.push(j);
                    }
                }
            }
        }
        comps.push(Component { bbox, area });
    }
    (labels, comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_image() -> RasterImage {
        let mut img = RasterImage::filled(20, 20, 255);
        for y in 5..10 {
            for x in 5..10 {
                img.set(x, y, 0);
            }
        }
        img
    }

    #[test]
    fn binarize_both_polarities() {
        let img = square_image();
        let m = binarize(&img);
        assert_eq!(m.count(), 25);
        let m2 = binarize(&img.inverted());
        assert_eq!(m, m2);
    }

    #[test]
    fn flat_and_low_contrast_images_have_no_ink() {
        assert_eq!(binarize(&RasterImage::filled(8, 8, 128)).count(), 0);
        let mut img = RasterImage::filled(8, 8, 120);
        img.set(1, 1, 140);
        assert_eq!(binarize(&img).count(), 0);
    }

    #[test]
    fn closing_keeps_bounds() {
        let m = binarize(&square_image());
        let closed = m.close();
        assert_eq!(closed.ink_bounds(), m.ink_bounds());
        assert_eq!(closed.count(), 25);
    }

    #[test]
    fn opening_drops_single_pixels() {
        let mut img = square_image();
        img.set(15, 15, 0);
        let m = binarize(&img);
        assert_eq!(m.count(), 26);
        assert_eq!(m.open().count(), 25);
    }

    #[test]
    fn components_are_eight_connected() {
        let mut m = InkMask::empty(6, 6);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(4, 4, true);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].area, 2);
        assert_eq!(comps[0].bbox, BoundingBox::new(0, 0, 2, 2).unwrap());
        assert_eq!(m.without_small_components(2).count(), 2);
    }
}
