//! 8-bit grayscale rasters and pixel-space boxes.

use std::io::Cursor;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image. `0` is black, `255` is white.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// Serialised as `{"png_base64": "..."}`, the image form used on the wire.
impl Serialize for RasterImage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = serializer.serialize_map(Some(1))?;
        m.serialize_entry("png_base64", &self.to_base64_png())?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for RasterImage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            png_base64: String,
        }
        let w = Wire::deserialize(deserializer)?;
        RasterImage::from_base64_png(&w.png_base64).map_err(serde::de::Error::custom)
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::argument(format!(
                "raster buffer has {} bytes, expected {}",
                pixels.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Uniform image. Panics on zero dimensions.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = v;
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox {
            xmin: 0,
            ymin: 0,
            xmax: self.width,
            ymax: self.height,
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as u64).sum::<u64>() as f64 / self.pixels.len() as f64
    }

    /// Lower median of the intensity histogram.
    pub fn median(&self) -> u8 {
        let hist = self.histogram();
        let half = (self.pixels.len() as u64).div_ceil(2);
        let mut acc = 0u64;
        for (v, &c) in hist.iter().enumerate() {
            acc += c;
            if acc >= half {
                return v as u8;
            }
        }
        255
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| 255 - p).collect(),
        }
    }

    /// Copy of the region covered by `bbox`, clipped to the image.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<Self> {
        let clipped = bbox
            .intersect(&self.bounds())
            .ok_or_else(|| Error::argument(format!("crop box {bbox} lies outside the image")))?;
        let mut pixels = Vec::with_capacity(clipped.area() as usize);
        for y in clipped.ymin..clipped.ymax {
            let row = y as usize * self.width as usize;
            pixels.extend_from_slice(
                &self.pixels[row + clipped.xmin as usize..row + clipped.xmax as usize],
            );
        }
        Self::new(clipped.width(), clipped.height(), pixels)
    }

    /// Writes `src` with its top-left corner at `(x, y)`, clipping at the edges.
    pub fn paste(&mut self, src: &RasterImage, x: u32, y: u32) {
        for sy in 0..src.height {
            let ty = y + sy;
            if ty >= self.height {
                break;
            }
            for sx in 0..src.width {
                let tx = x + sx;
                if tx >= self.width {
                    break;
                }
                self.set(tx, ty, src.get(sx, sy));
            }
        }
    }

    /// Nearest-neighbour resample.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut out = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            let sy = ((y as u64 * self.height as u64) / height as u64) as u32;
            for x in 0..width {
                let sx = ((x as u64 * self.width as u64) / width as u64) as u32;
                out.push(self.get(sx, sy));
            }
        }
        Self {
            width,
            height,
            pixels: out,
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let buf = image::GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .expect("png encoding into memory does not fail");
        out.into_inner()
    }

    /// Decodes any PNG; colour images are converted to luma.
    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))?
            .into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn to_base64_png(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_png())
    }

    pub fn from_base64_png(data: &str) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(data.trim())
            .map_err(|e| Error::Image(format!("invalid base64: {e}")))?;
        Self::from_png(&bytes)
    }
}

/// Axis-aligned box in pixel coordinates, origin top-left, max edges exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

impl BoundingBox {
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Result<Self> {
        let b = Self {
            xmin,
            ymin,
            xmax,
            ymax,
        };
        if b.is_degenerate() {
            return Err(Error::argument(format!("degenerate bbox {b}")));
        }
        Ok(b)
    }

    pub fn is_degenerate(&self) -> bool {
        self.xmin >= self.xmax || self.ymin >= self.ymax
    }

    pub fn width(&self) -> u32 {
        self.xmax.saturating_sub(self.xmin)
    }

    pub fn height(&self) -> u32 {
        self.ymax.saturating_sub(self.ymin)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.xmin >= self.xmin
            && other.ymin >= self.ymin
            && other.xmax <= self.xmax
            && other.ymax <= self.ymax
    }

    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let b = BoundingBox {
            xmin: self.xmin.max(other.xmin),
            ymin: self.ymin.max(other.ymin),
            xmax: self.xmax.min(other.xmax),
            ymax: self.ymax.min(other.ymax),
        };
        (!b.is_degenerate()).then_some(b)
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            xmin: self.xmin.min(other.xmin),
            ymin: self.ymin.min(other.ymin),
            xmax: self.xmax.max(other.xmax),
            ymax: self.ymax.max(other.ymax),
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersect(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Chebyshev gap between two boxes; zero when they touch or overlap.
    pub fn gap(&self, other: &BoundingBox) -> u32 {
        let dx = other
            .xmin
            .saturating_sub(self.xmax)
            .max(self.xmin.saturating_sub(other.xmax));
        let dy = other
            .ymin
            .saturating_sub(self.ymax)
            .max(self.ymin.saturating_sub(other.ymax));
        dx.max(dy)
    }

    /// Grows the box by `margin` on every side, clipped to `limit`.
    pub fn expanded(&self, margin: u32, limit: &BoundingBox) -> BoundingBox {
        BoundingBox {
            xmin: self.xmin.saturating_sub(margin).max(limit.xmin),
            ymin: self.ymin.saturating_sub(margin).max(limit.ymin),
            xmax: (self.xmax + margin).min(limit.xmax),
            ymax: (self.ymax + margin).min(limit.ymax),
        }
    }

    pub fn to_array(&self) -> [u32; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}]",
            self.xmin, self.ymin, self.xmax, self.ymax
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(RasterImage::new(0, 4, vec![]).is_err());
        assert!(RasterImage::new(2, 2, vec![0; 3]).is_err());
        assert!(RasterImage::new(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn half_open_iou() {
        let a = BoundingBox::new(0, 0, 10, 10).unwrap();
        let b = BoundingBox::new(5, 0, 15, 10).unwrap();
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
        let c = BoundingBox::new(10, 0, 20, 10).unwrap();
        assert_eq!(a.iou(&c), 0.0);
        assert_eq!(a.gap(&c), 0);
        let d = BoundingBox::new(13, 20, 20, 30).unwrap();
        assert_eq!(a.gap(&d), 10);
    }

    #[test]
    fn png_round_trip() {
        let mut img = RasterImage::filled(7, 5, 200);
        img.set(3, 2, 17);
        let back = RasterImage::from_base64_png(&img.to_base64_png()).unwrap();
        assert_eq!(img, back);
        assert!(RasterImage::from_png(b"not a png").is_err());
    }

    #[test]
    fn crop_and_median() {
        let mut img = RasterImage::filled(4, 4, 10);
        img.set(1, 1, 250);
        let c = img.crop(&BoundingBox::new(1, 1, 3, 3).unwrap()).unwrap();
        assert_eq!(c.pixels(), &[250, 10, 10, 10]);
        assert_eq!(img.median(), 10);
        assert!(img.crop(&BoundingBox::new(8, 8, 9, 9).unwrap()).is_err());
    }
}
