use serde::{Deserialize, Serialize};

use super::detect::detect_characters;
use crate::raster::RasterImage;

/// The four image kinds handled by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    WholeRubbing,
    WholeFacsimile,
    SingleRubbing,
    SingleFacsimile,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::WholeRubbing,
        Modality::WholeFacsimile,
        Modality::SingleRubbing,
        Modality::SingleFacsimile,
    ];

    pub fn is_rubbing(self) -> bool {
        matches!(self, Modality::WholeRubbing | Modality::SingleRubbing)
    }

    pub fn is_whole(self) -> bool {
        matches!(self, Modality::WholeRubbing | Modality::WholeFacsimile)
    }

    /// Option letter in the four-choice modality question.
    pub fn option_letter(self) -> char {
        match self {
            Modality::WholeRubbing => 'A',
            Modality::WholeFacsimile => 'B',
            Modality::SingleRubbing => 'C',
            Modality::SingleFacsimile => 'D',
        }
    }

    pub fn from_option_letter(letter: char) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.option_letter() == letter)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::WholeRubbing => "whole-rubbing",
            Modality::WholeFacsimile => "whole-facsimile",
            Modality::SingleRubbing => "single-rubbing",
            Modality::SingleFacsimile => "single-facsimile",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A lone cluster must cover at least this fraction of the frame to count
/// as a single-character crop.
pub const SINGLE_MIN_COVERAGE: f64 = 0.15;

/// Rule-based modality decision.
///
/// Polarity comes from the median intensity (rubbings are light-on-dark);
/// single versus whole comes from the number of character clusters and the
/// fraction of the frame they cover. Confidence is the product of the
/// polarity margin and the layout certainty, so flat or inkless images never
/// exceed 0.5.
pub fn classify_modality(image: &RasterImage) -> (Modality, f64) {
    let median = image.median() as f64;
    let rubbing = median < 128.0;
    let polarity_conf = ((median - 128.0).abs() / 64.0).min(1.0);

    let dets = detect_characters(image);
    let frame = image.bounds().area() as f64;
    let (single, layout_conf) = match dets.len() {
        0 => (false, 0.5),
        1 => {
            let coverage = dets[0].bbox.area() as f64 / frame;
            if coverage >= SINGLE_MIN_COVERAGE {
                (true, (0.5 + coverage).min(1.0))
            } else {
                (false, 0.6)
            }
        }
        2 => (false, 0.8),
        _ => (false, 1.0),
    };
    let modality = match (single, rubbing) {
        (false, true) => Modality::WholeRubbing,
        (false, false) => Modality::WholeFacsimile,
        (true, true) => Modality::SingleRubbing,
        (true, false) => Modality::SingleFacsimile,
    };
    (modality, polarity_conf * layout_conf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_gray_has_low_confidence() {
        for v in [0u8, 100, 128, 200, 255] {
            let (_, conf) = classify_modality(&RasterImage::filled(64, 64, v));
            assert!(conf <= 0.5, "value {v} gave {conf}");
        }
    }

    #[test]
    fn option_letters_round_trip() {
        for m in Modality::ALL {
            assert_eq!(Modality::from_option_letter(m.option_letter()), Some(m));
            assert_eq!(Modality::parse(m.as_str()), Some(m));
        }
    }

    #[test]
    fn single_dark_on_light_blob() {
        let mut img = RasterImage::filled(40, 40, 255);
        for y in 8..32 {
            for x in 10..30 {
                if (x + y) % 7 < 4 {
                    img.set(x, y, 0);
                }
            }
        }
        let (m, conf) = classify_modality(&img);
        assert_eq!(m, Modality::SingleFacsimile);
        assert!(conf > 0.5);
        assert_eq!(classify_modality(&img.inverted()).0, Modality::SingleRubbing);
    }
}
