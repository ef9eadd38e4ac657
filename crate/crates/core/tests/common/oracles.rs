//! Exhaustive reference implementations of the benchmark metrics, written
//! without looking at the library code paths. Shared by the metric tests
//! and the acceptance run.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scriptorium::bench::*;
use scriptorium::raster::RasterImage;

const EPS: f64 = 1e-9;

pub fn recall_at_k(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut found = 0;
    for r in relevant {
        if let Some(pos) = ranked.iter().position(|x| x == r) {
            if pos < k {
                found += 1;
            }
        }
    }
    found as f64 / relevant.len() as f64
}

/// Precision at every relevant rank, recounted from scratch each time.
pub fn average_precision(ranked: &[String], relevant: &BTreeSet<String>, cutoff: usize) -> f64 {
    let denom = relevant.len().min(cutoff);
    if denom == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 1..=cutoff.min(ranked.len()) {
        if relevant.contains(&ranked[i - 1]) {
            let hits = ranked[..i].iter().filter(|x| relevant.contains(*x)).count();
            sum += hits as f64 / i as f64;
        }
    }
    sum / denom as f64
}

pub fn mre(gt: &[u32], pred: &[u32]) -> f64 {
    let terms: Vec<f64> = gt
        .iter()
        .zip(pred)
        .filter(|(g, _)| **g > 0)
        .map(|(g, p)| (*g as i64 - *p as i64).unsigned_abs() as f64 / *g as f64)
        .collect();
    if terms.is_empty() {
        0.0
    } else {
        terms.iter().sum::<f64>() / terms.len() as f64
    }
}

/// IoU by counting covered unit cells.
pub fn pixel_iou(a: &[u32; 4], b: &[u32; 4]) -> f64 {
    if a[0] >= a[2] || a[1] >= a[3] || b[0] >= b[2] || b[1] >= b[3] {
        return 0.0;
    }
    let (x1, y1) = (a[2].max(b[2]), a[3].max(b[3]));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..y1 {
        for x in 0..x1 {
            let ia = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
            let ib = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy matching by repeated full scans for the best remaining pair.
pub fn miou(gt: &[[u32; 4]], pred: &[[u32; 4]]) -> f64 {
    let denom = gt.len().max(pred.len());
    if denom == 0 {
        return 1.0;
    }
    let mut free_g: Vec<bool> = vec![true; gt.len()];
    let mut free_p: Vec<bool> = vec![true; pred.len()];
    let mut total = 0.0;
    loop {
        let mut best: Option<(f64, [u32; 4], [u32; 4], usize, usize)> = None;
        for (i, a) in gt.iter().enumerate().filter(|(i, _)| free_g[*i]) {
            for (j, b) in pred.iter().enumerate().filter(|(j, _)| free_p[*j]) {
                let v = pixel_iou(a, b);
                if v <= 0.0 {
                    continue;
                }
                let cand = (v, *a.min(b), *a.max(b), i, j);
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        cand.0 > cur.0 + EPS
                            || ((cand.0 - cur.0).abs() <= EPS && (cand.1, cand.2, cand.3, cand.4) < (cur.1, cur.2, cur.3, cur.4))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        match best {
            Some((v, _, _, i, j)) => {
                free_g[i] = false;
                free_p[j] = false;
                total += v;
            }
            None => break,
        }
    }
    total / denom as f64
}

/// Multiset intersection by repeatedly striking matched items.
pub fn prf_coverage(pred: &[String], real: &[String], pc: &BTreeSet<String>, rc: &BTreeSet<String>) -> (f64, f64, f64, f64) {
    let mut pool: Vec<&String> = real.iter().collect();
    let mut tp = 0usize;
    for p in pred {
        if let Some(i) = pool.iter().position(|r| *r == p) {
            pool.remove(i);
            tp += 1;
        }
    }
    let precision = if pred.is_empty() { 0.0 } else { tp as f64 / pred.len() as f64 };
    let recall = if real.is_empty() { 0.0 } else { tp as f64 / real.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 / (1.0 / precision + 1.0 / recall) };
    let coverage = rc.iter().filter(|c| pc.contains(*c)).count() as f64 / rc.len() as f64;
    (precision, recall, f1, coverage)
}

pub fn accuracy(answers: &[Vec<String>], truth: &[String], mode: AccuracyMode) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let n = truth.len() as f64;
    match mode {
        AccuracyMode::Acc | AccuracyMode::AccAt1 => {
            (0..truth.len()).filter(|&i| answers[i].first() == Some(&truth[i])).count() as f64 / n
        }
        AccuracyMode::AccAt5 => (0..truth.len()).filter(|&i| answers[i].iter().take(5).any(|a| *a == truth[i])).count() as f64 / n,
        AccuracyMode::MacroPrecision | AccuracyMode::MacroRecall => {
            // Confusion table keyed on (truth, top prediction).
            let mut confusion: BTreeMap<(String, Option<String>), usize> = BTreeMap::new();
            for (a, t) in answers.iter().zip(truth) {
                *confusion.entry((t.clone(), a.first().cloned())).or_default() += 1;
            }
            let mut classes: BTreeSet<String> = truth.iter().cloned().collect();
            for (_, p) in confusion.keys() {
                if let Some(p) = p {
                    classes.insert(p.clone());
                }
            }
            let mut per_class = Vec::new();
            for c in &classes {
                let tp = confusion.get(&(c.clone(), Some(c.clone()))).copied().unwrap_or(0);
                let denom: usize = confusion
                    .iter()
                    .filter(|((t, p), _)| {
                        if mode == AccuracyMode::MacroPrecision {
                            p.as_ref() == Some(c)
                        } else {
                            t == c
                        }
                    })
                    .map(|(_, n)| *n)
                    .sum();
                per_class.push(if denom == 0 { 0.0 } else { tp as f64 / denom as f64 });
            }
            per_class.iter().sum::<f64>() / per_class.len() as f64
        }
    }
}

/// Direct per-window SSIM with population statistics.
pub fn ssim(a: &RasterImage, b: &RasterImage) -> f64 {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let (ww, wh) = (8usize.min(w), 8usize.min(h));
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - wh {
        for x0 in 0..=w - ww {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for y in y0..y0 + wh {
                for x in x0..x0 + ww {
                    xs.push(a.get(x as u32, y as u32) as f64);
                    ys.push(b.get(x as u32, y as u32) as f64);
                }
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
            let cov = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn ids(rng: &mut ChaCha8Rng, pool: usize, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("c{}", rng.random_range(0..pool))).collect()
}

fn random_box(rng: &mut ChaCha8Rng) -> [u32; 4] {
    let x0 = rng.random_range(0..12);
    let y0 = rng.random_range(0..12);
    // Occasionally degenerate.
    let x1 = x0 + rng.random_range(0..7);
    let y1 = y0 + rng.random_range(1..7);
    [x0, y0, x1, y1]
}

/// Compares every metric to its oracle on one random instance and returns
/// a description of each disagreement.
pub fn check_instance(seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();

    // Retrieval.
    let pool = rng.random_range(1..15);
    let mut candidates: Vec<String> = (0..pool).map(|i| format!("d{i}")).collect();
    let mut queries = Vec::new();
    for _ in 0..rng.random_range(1..6) {
        for i in (1..candidates.len()).rev() {
            candidates.swap(i, rng.random_range(0..=i));
        }
        let len = rng.random_range(0..=candidates.len());
        let ranked = candidates[..len].to_vec();
        let relevant: BTreeSet<String> = candidates.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
        queries.push(RankedQuery { ranked, relevant });
    }
    let ks = [1, 3, 5, 10];
    let got = metric_retrieval(&queries, &ks).expect("positive cut-offs");
    let used: Vec<&RankedQuery> = queries.iter().filter(|q| !q.relevant.is_empty()).collect();
    for k in ks {
        let want = if used.is_empty() {
            0.0
        } else {
            used.iter().map(|q| recall_at_k(&q.ranked, &q.relevant, k)).sum::<f64>() / used.len() as f64
        };
        if !close(got.recall[&k], want) {
            bad.push(format!("seed {seed}: recall@{k} {} vs {want}", got.recall[&k]));
        }
    }
    let want_map = if used.is_empty() {
        0.0
    } else {
        used.iter().map(|q| average_precision(&q.ranked, &q.relevant, 5)).sum::<f64>() / used.len() as f64
    };
    if !close(got.map_at_5, want_map) {
        bad.push(format!("seed {seed}: mAP@5 {} vs {want_map}", got.map_at_5));
    }
    let want_yes = if used.is_empty() {
        0.0
    } else {
        used.iter().map(|q| average_precision(&q.ranked, &q.relevant, q.relevant.len())).sum::<f64>() / used.len() as f64
    };
    if !close(map_at_yes(&queries), want_yes) {
        bad.push(format!("seed {seed}: mAP@|yes| {} vs {want_yes}", map_at_yes(&queries)));
    }

    // Counting.
    let n = rng.random_range(1..10);
    let gt: Vec<u32> = (0..n).map(|_| rng.random_range(0..8)).collect();
    let pred: Vec<u32> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let got = metric_mre(&gt, &pred).expect("equal lengths").mre;
    if !close(got, mre(&gt, &pred)) {
        bad.push(format!("seed {seed}: mre {got} vs {}", mre(&gt, &pred)));
    }

    // Boxes.
    let g: Vec<[u32; 4]> = (0..rng.random_range(0..5)).map(|_| random_box(&mut rng)).collect();
    let p: Vec<[u32; 4]> = (0..rng.random_range(0..5)).map(|_| random_box(&mut rng)).collect();
    for (a, b) in g.iter().zip(&p) {
        if !close(raw_iou(a, b), pixel_iou(a, b)) {
            bad.push(format!("seed {seed}: iou {a:?} {b:?}"));
        }
    }
    if !close(metric_miou(&g, &p), miou(&g, &p)) {
        bad.push(format!("seed {seed}: miou {} vs {}", metric_miou(&g, &p), miou(&g, &p)));
    }

    // Instance P/R/F1 and coverage.
    let (np, nr) = (rng.random_range(0..8), rng.random_range(1..8));
    let pred = ids(&mut rng, 6, np);
    let real = ids(&mut rng, 6, nr);
    let pc: BTreeSet<String> = pred.iter().cloned().collect();
    let rc: BTreeSet<String> = real.iter().cloned().collect();
    let got = metric_prf_coverage(&pred, &real, &pc, &rc).expect("non-empty categories");
    let want = prf_coverage(&pred, &real, &pc, &rc);
    if !(close(got.precision, want.0) && close(got.recall, want.1) && close(got.f1, want.2) && close(got.coverage, want.3)) {
        bad.push(format!("seed {seed}: prf {got:?} vs {want:?}"));
    }

    // Accuracy family.
    let n = rng.random_range(1..12);
    let truth = ids(&mut rng, 5, n);
    let answers: Vec<Vec<String>> = (0..n)
        .map(|_| {
            let len = rng.random_range(0..7);
            ids(&mut rng, 7, len)
        })
        .collect();
    for mode in [AccuracyMode::Acc, AccuracyMode::AccAt1, AccuracyMode::AccAt5, AccuracyMode::MacroPrecision, AccuracyMode::MacroRecall] {
        let got = metric_accuracy(&answers, &truth, mode).expect("equal lengths");
        let want = accuracy(&answers, &truth, mode);
        if !close(got, want) {
            bad.push(format!("seed {seed}: {} {got} vs {want}", mode.as_str()));
        }
    }

    // SSIM on small random images, including ones narrower than a window.
    let w = rng.random_range(3..20);
    let h = rng.random_range(3..20);
    let pa: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
    let pb: Vec<u8> = pa.iter().map(|v| v.saturating_add(rng.random_range(0..60))).collect();
    let a = RasterImage::new(w, h, pa).expect("sized");
    let b = RasterImage::new(w, h, pb).expect("sized");
    let got = metric_ssim(&a, &b).expect("same size");
    if (got - ssim(&a, &b)).abs() > 1e-9 {
        bad.push(format!("seed {seed}: ssim {got} vs {}", ssim(&a, &b)));
    }
    bad
}
