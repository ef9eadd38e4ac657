mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use scriptorium::bench::*;

use common::oracles;

#[test]
fn every_metric_matches_its_oracle_on_200_instances() {
    let mismatches: Vec<String> = (0..200u64).flat_map(oracles::check_instance).collect();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn f1_from_reported_precision_and_recall() {
    let f1 = f1_score(0.8959, 0.9269);
    // Harmonic mean of the rounded pair, computed by hand.
    assert!((f1 - 0.911136).abs() < 1e-6, "{f1}");
}

fn id_list(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0u8..8).prop_map(|i| format!("x{i}")), 0..max_len)
}

fn boxes() -> impl Strategy<Value = Vec<[u32; 4]>> {
    prop::collection::vec(
        (0u32..30, 0u32..30, 1u32..15, 1u32..15).prop_map(|(x, y, w, h)| [x, y, x + w, y + h]),
        0..6,
    )
}

proptest! {
    #[test]
    fn recall_is_monotone_in_k(ranked in id_list(12), relevant in id_list(6)) {
        let mut seen = BTreeSet::new();
        let ranked: Vec<String> = ranked.into_iter().filter(|x| seen.insert(x.clone())).collect();
        let relevant: BTreeSet<String> = relevant.into_iter().collect();
        let mut prev = 0.0;
        for k in 1..=14 {
            let r = recall_at_k(&ranked, &relevant, k);
            prop_assert!(r >= prev);
            prev = r;
        }
        let ap = average_precision(&ranked, &relevant, AP_CUTOFF);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn mre_is_non_negative(pairs in prop::collection::vec((0u32..20, 0u32..20), 0..10)) {
        let (g, p): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        prop_assert!(metric_mre(&g, &p).unwrap().mre >= 0.0);
    }

    #[test]
    fn miou_is_symmetric(a in boxes(), b in boxes()) {
        let (x, y) = (metric_miou(&a, &b), metric_miou(&b, &a));
        prop_assert!((x - y).abs() < 1e-12, "{} vs {}", x, y);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn f1_lies_between_precision_and_recall(p in 0.001f64..=1.0, r in 0.001f64..=1.0) {
        let f = f1_score(p, r);
        prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
    }

    #[test]
    fn accuracy_ignores_question_order(
        rows in prop::collection::vec((id_list(5), (0u8..4).prop_map(|i| format!("x{i}"))), 1..12),
        rotate in 0usize..12,
    ) {
        let (answers, truth): (Vec<Vec<String>>, Vec<String>) = rows.iter().cloned().unzip();
        let mut shifted = rows.clone();
        let len = shifted.len();
        shifted.rotate_left(rotate % len);
        let (a2, t2): (Vec<Vec<String>>, Vec<String>) = shifted.into_iter().unzip();
        for mode in [AccuracyMode::Acc, AccuracyMode::AccAt5, AccuracyMode::MacroPrecision, AccuracyMode::MacroRecall] {
            let x = metric_accuracy(&answers, &truth, mode).unwrap();
            let y = metric_accuracy(&a2, &t2, mode).unwrap();
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
