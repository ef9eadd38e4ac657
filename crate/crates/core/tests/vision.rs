use std::sync::OnceLock;

use proptest::prelude::*;
use scriptorium::kb::KbSnapshot;
use scriptorium::raster::RasterImage;
use scriptorium::synth::{generate_corpus, SynthConfig, SynthCorpus};
use scriptorium::vision::*;

fn corpus() -> &'static (SynthCorpus, KbSnapshot) {
    static C: OnceLock<(SynthCorpus, KbSnapshot)> = OnceLock::new();
    C.get_or_init(|| {
        let c = generate_corpus(&SynthConfig::default()).unwrap();
        let kb = c.build_snapshot().unwrap();
        (c, kb)
    })
}

fn cosine64(a: &VisualDescriptor, b: &VisualDescriptor) -> f64 {
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.values().iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.values().iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[test]
fn every_indexed_item_finds_itself_first() {
    let (_, kb) = corpus();
    for index in [kb.instance_index(), kb.standard_index(), kb.rubbing_index()] {
        for e in index.entries() {
            let hit = &index.search(&e.descriptor, 1).unwrap()[0];
            assert_eq!(hit.target_id, e.id);
        }
    }
}

#[test]
fn glyph_ranking_matches_exhaustive_sort() {
    let (_, kb) = corpus();
    let index = kb.instance_index();
    let k = 10;
    for query in index.entries().iter().step_by(7) {
        let hits = retrieve_glyphs(&query.descriptor, index, k).unwrap();
        let mut all: Vec<(f64, &str)> = index
            .entries()
            .iter()
            .map(|e| (cosine64(&query.descriptor, &e.descriptor), e.id.as_str()))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        // Same score at every rank, and each hit's score is its own exact
        // cosine: equal to the argsort up to reordering within ties.
        for (h, want) in hits.iter().zip(&all) {
            let exact = all.iter().find(|(_, id)| *id == h.target_id).unwrap().0;
            assert!((h.score - exact).abs() < 1e-5, "{} score {} vs {exact}", h.target_id, h.score);
            assert!((h.score - want.0).abs() < 1e-5, "rank {}: {} vs {}", h.rank, h.score, want.0);
        }
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

#[test]
fn descriptors_are_deterministic_and_unit_norm() {
    let (c, _) = corpus();
    for img in c.images.values().take(40) {
        let a = encode_image(img);
        let b = encode_image(img);
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
        assert_eq!(a.values().len(), DESCRIPTOR_DIMS);
        let n = a.norm();
        assert!(n == 0.0 || (n - 1.0).abs() <= 1e-6, "{n}");
    }
}

#[test]
fn detections_stay_in_bounds_and_repeat() {
    let (c, _) = corpus();
    for f in &c.ground_truth.fragments {
        let img = &c.images[&f.rubbing_ref];
        let first = detect_characters(img);
        assert_eq!(first, detect_characters(img));
        for d in &first {
            assert!(img.bounds().contains_box(&d.bbox));
        }
    }
}

#[test]
fn generated_facsimiles_are_lighter_than_rubbings() {
    let (c, _) = corpus();
    for f in &c.ground_truth.fragments {
        let rubbing = &c.images[&f.rubbing_ref];
        let out = generate_facsimile(rubbing);
        assert!(out.mean() > rubbing.mean(), "{}", f.fragment_id);
    }
}

#[test]
fn modality_of_corpus_images() {
    let (c, _) = corpus();
    for f in &c.ground_truth.fragments {
        assert_eq!(classify_modality(&c.images[&f.rubbing_ref]).0, Modality::WholeRubbing);
        assert_eq!(classify_modality(&c.images[&f.facsimile_ref]).0, Modality::WholeFacsimile);
    }
}

#[test]
fn blank_image_has_no_detections() {
    assert!(detect_characters(&RasterImage::filled(64, 64, 255)).is_empty());
    assert!(detect_characters(&RasterImage::filled(64, 64, 0)).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_images_encode_deterministically(
        img in (1u32..48, 1u32..48).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<u8>(), (w * h) as usize)
                .prop_map(move |px| RasterImage::new(w, h, px).unwrap())
        })
    ) {
        prop_assert_eq!(encode_image(&img).to_le_bytes(), encode_image(&img).to_le_bytes());
        for d in detect_characters(&img) {
            prop_assert!(img.bounds().contains_box(&d.bbox));
        }
    }
}

#[test]
fn denoised_crops_resemble_the_facsimile() {
    let (c, kb) = corpus();
    let mut scores = Vec::new();
    for f in &c.ground_truth.fragments {
        let facsimile = &c.images[&f.facsimile_ref];
        for ch in kb.lookup_fragment(&f.fragment_id).unwrap().characters {
            let crop = kb.image(&ch.crop_ref).unwrap();
            let region = scriptorium::synth::single_crop_region(&ch.bbox, &facsimile.bounds());
            let target = facsimile.crop(&region).unwrap();
            let out = denoise_character(crop);
            scores.push(scriptorium::bench::metric_ssim(&out, &target).unwrap());
        }
    }
    scores.sort_by(f64::total_cmp);
    let median = scores[scores.len() / 2];
    assert!(median >= 0.9, "median {median}");
    assert!(scores[0] >= 0.6, "min {}", scores[0]);
}
