use proptest::prelude::*;
use scriptorium::synth::*;

fn config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_classes: 6,
        n_fragments: 5,
        ..SynthConfig::default()
    }
}

#[test]
fn single_thread_matches_parallel() {
    let parallel = generate_corpus(&config(21)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| generate_corpus(&config(21)).unwrap());
    assert_eq!(parallel.records, serial.records);
    assert_eq!(parallel.images, serial.images);
    assert_eq!(parallel.ground_truth, serial.ground_truth);
}

#[test]
fn seeds_are_mixed_not_offset() {
    assert_ne!(derive_seed(7, "fragment", 0), derive_seed(7, "fragment", 1));
    assert_ne!(derive_seed(7, "fragment", 0), derive_seed(8, "fragment", 0));
    assert_ne!(derive_seed(7, "fragment", 0), derive_seed(7, "noise", 0));
}

#[test]
fn invalid_config_is_rejected() {
    let bad = SynthConfig {
        n_classes: 0,
        ..SynthConfig::default()
    };
    assert_eq!(generate_corpus(&bad).unwrap_err().code(), "invalid_argument");
}

#[test]
fn ground_truth_file_round_trips() {
    let c = generate_corpus(&config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(GROUND_TRUTH_FILE);
    c.ground_truth.save(&path).unwrap();
    assert_eq!(GroundTruth::load(&path).unwrap(), c.ground_truth);
}

#[test]
fn modality_set_is_balanced() {
    let set = generate_modality_set(&config(4), 5, NoiseLevel::Low).unwrap();
    assert_eq!(set.len(), 20);
    for m in scriptorium::vision::Modality::ALL {
        assert_eq!(set.iter().filter(|i| i.modality == m).count(), 5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ground_truth_is_closed(seed in 0u64..10_000) {
        let c = generate_corpus(&config(seed)).unwrap();
        let gt = &c.ground_truth;
        let classes: Vec<&str> = gt.classes.iter().map(|k| k.class_id.as_str()).collect();
        for f in &gt.fragments {
            let img = &c.images[&f.rubbing_ref];
            prop_assert!(c.images.contains_key(&f.facsimile_ref));
            prop_assert!(!f.characters.is_empty());
            for ch in &f.characters {
                prop_assert!(classes.contains(&ch.class_id.as_str()));
                prop_assert!(img.bounds().contains_box(&ch.bbox));
                prop_assert!(!ch.bbox.is_degenerate());
            }
        }
        for k in &gt.classes {
            for frag in &k.fragments {
                prop_assert!(gt.fragment(frag).is_some());
            }
        }
        prop_assert!(c.build_snapshot().is_ok());
    }

    #[test]
    fn generation_is_repeatable(seed in 0u64..10_000) {
        let a = generate_corpus(&config(seed)).unwrap();
        let b = generate_corpus(&config(seed)).unwrap();
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.images, b.images);
    }
}
