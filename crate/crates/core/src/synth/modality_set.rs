use rayon::prelude::*;

use super::corpus::SynthConfig;
use super::fragment::{render_fragment, single_crop_region};
use super::glyph::GlyphBank;
use super::rubbing::{render_rubbing, NoiseLevel};
use super::seed::derive_seed;
use crate::error::Result;
use crate::raster::RasterImage;
use crate::vision::Modality;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub modality: Modality,
    pub image: RasterImage,
}

/// Balanced four-modality image set: `per_modality` images of each kind,
/// ordered by modality then index.
///
/// Whole images are full fragments; single images are glyph crops cut with
/// [`single_crop_region`]. Rubbings use `noise`.
pub fn generate_modality_set(
    config: &SynthConfig,
    per_modality: usize,
    noise: NoiseLevel,
) -> Result<Vec<LabeledImage>> {
    config.validate()?;
    let bank = GlyphBank::generate(config.seed, config.n_classes);
    let per_fragment: Vec<Vec<LabeledImage>> = (0..per_modality)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, "modality-set", i as u64);
            let f = render_fragment(config, &bank, seed)?;
            let rubbing = render_rubbing(&f.facsimile, noise, derive_seed(seed, "noise", 0));
            let pick = f.annotations[i % f.annotations.len()].bbox;
            let region = single_crop_region(&pick, &f.facsimile.bounds());
            Ok(vec![
                LabeledImage {
                    id: format!("whole-rubbing-{i:03}"),
                    modality: Modality::WholeRubbing,
                    image: rubbing.clone(),
                },
                LabeledImage {
                    id: format!("whole-facsimile-{i:03}"),
                    modality: Modality::WholeFacsimile,
                    image: f.facsimile.clone(),
                },
                LabeledImage {
                    id: format!("single-rubbing-{i:03}"),
                    modality: Modality::SingleRubbing,
                    image: rubbing.crop(&region)?,
                },
                LabeledImage {
                    id: format!("single-facsimile-{i:03}"),
                    modality: Modality::SingleFacsimile,
                    image: f.facsimile.crop(&region)?,
                },
            ])
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<LabeledImage> = per_fragment.into_iter().flatten().collect();
    out.sort_by_key(|l| (l.modality, l.id.clone()));
    Ok(out)
}
