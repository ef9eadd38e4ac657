//! Benchmark metrics. Every function here is pure and order-preserving so
//! reports can be recomputed from per-question records.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BoundingBox, RasterImage};

/// One ranked retrieval list with its relevant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedQuery {
    /// Candidate ids, best first. No duplicates.
    pub ranked: Vec<String>,
    pub relevant: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    /// `k` to mean Recall@k.
    pub recall: BTreeMap<usize, f64>,
    pub map_at_5: f64,
    /// Queries that entered the averages.
    pub evaluated: usize,
    /// Queries dropped for having no relevant item.
    pub excluded: usize,
}

/// Cut-off of the mAP reported alongside Recall@k.
pub const AP_CUTOFF: usize = 5;

/// Average precision over the first `cutoff` ranks, normalised by
/// `min(|relevant|, cutoff)`. Zero when nothing is relevant.
pub fn average_precision(ranked: &[String], relevant: &BTreeSet<String>, cutoff: usize) -> f64 {
    let denom = relevant.len().min(cutoff);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().take(cutoff).enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Fraction of the relevant set found in the first `k` ranks.
pub fn recall_at_k(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let found = ranked.iter().take(k).filter(|id| relevant.contains(*id)).count();
    found as f64 / relevant.len() as f64
}

/// Mean Recall@k for each `k` in `ks` and mAP@5. Queries with an empty
/// relevant set are excluded and counted.
pub fn metric_retrieval(queries: &[RankedQuery], ks: &[usize]) -> Result<RetrievalMetrics> {
    if ks.contains(&0) {
        return Err(Error::argument("recall cut-offs must be positive"));
    }
    let used: Vec<&RankedQuery> = queries.iter().filter(|q| !q.relevant.is_empty()).collect();
    let n = used.len();
    let mean = |f: &dyn Fn(&RankedQuery) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            used.iter().map(|q| f(q)).sum::<f64>() / n as f64
        }
    };
    Ok(RetrievalMetrics {
        recall: ks
            .iter()
            .map(|&k| (k, mean(&|q| recall_at_k(&q.ranked, &q.relevant, k))))
            .collect(),
        map_at_5: mean(&|q| average_precision(&q.ranked, &q.relevant, AP_CUTOFF)),
        evaluated: n,
        excluded: queries.len() - n,
    })
}

/// mAP@|Yes|: each query's candidates are ranked by the asserted
/// yes-confidence and AP is truncated at the number of truly positive
/// candidates. `ranked` must already be in that order.
///
/// The cut-off is an interpretation; the report metadata says so.
pub fn map_at_yes(queries: &[RankedQuery]) -> f64 {
    let used: Vec<&RankedQuery> = queries.iter().filter(|q| !q.relevant.is_empty()).collect();
    if used.is_empty() {
        return 0.0;
    }
    used.iter()
        .map(|q| average_precision(&q.ranked, &q.relevant, q.relevant.len()))
        .sum::<f64>()
        / used.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MreOutcome {
    pub mre: f64,
    pub evaluated: usize,
    /// Images with zero ground-truth characters, left out of the mean.
    pub excluded_zero_gt: usize,
}

/// Mean relative counting error `|K_gt - K_pre| / K_gt`. Zero when no image
/// has a positive ground-truth count.
pub fn metric_mre(gt: &[u32], pred: &[u32]) -> Result<MreOutcome> {
    if gt.len() != pred.len() {
        return Err(Error::argument(format!(
            "{} ground-truth counts but {} predictions",
            gt.len(),
            pred.len()
        )));
    }
    let mut sum = 0.0;
    let mut evaluated = 0;
    for (&g, &p) in gt.iter().zip(pred) {
        if g == 0 {
            continue;
        }
        sum += (g as f64 - p as f64).abs() / g as f64;
        evaluated += 1;
    }
    Ok(MreOutcome {
        mre: if evaluated == 0 { 0.0 } else { sum / evaluated as f64 },
        evaluated,
        excluded_zero_gt: gt.len() - evaluated,
    })
}

/// IoU of two raw `[xmin, ymin, xmax, ymax]` boxes; degenerate boxes score 0.
pub fn raw_iou(a: &[u32; 4], b: &[u32; 4]) -> f64 {
    match (BoundingBox::new(a[0], a[1], a[2], a[3]), BoundingBox::new(b[0], b[1], b[2], b[3])) {
        (Ok(a), Ok(b)) => a.iou(&b),
        _ => 0.0,
    }
}

/// Greedy one-to-one matching by descending IoU; the mean runs over
/// `max(|gt|, |pred|)` so unmatched boxes count as 0. Two empty sets score 1.
///
/// Ties are broken on the unordered pair of box coordinates, which keeps the
/// result symmetric in its arguments.
pub fn metric_miou(gt: &[[u32; 4]], pred: &[[u32; 4]]) -> f64 {
    let denom = gt.len().max(pred.len());
    if denom == 0 {
        return 1.0;
    }
    let mut pairs: Vec<(f64, [u32; 4], [u32; 4], usize, usize)> = Vec::new();
    for (i, a) in gt.iter().enumerate() {
        for (j, b) in pred.iter().enumerate() {
            let iou = raw_iou(a, b);
            if iou > 0.0 {
                pairs.push((iou, *a.min(b), *a.max(b), i, j));
            }
        }
    }
    pairs.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
            .then(x.4.cmp(&y.4))
    });
    let mut used_gt = vec![false; gt.len()];
    let mut used_pred = vec![false; pred.len()];
    let mut total = 0.0;
    for (iou, _, _, i, j) in pairs {
        if !used_gt[i] && !used_pred[j] {
            used_gt[i] = true;
            used_pred[j] = true;
            total += iou;
        }
    }
    total / denom as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfCoverage {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 from confusion counts. Empty denominators give 0.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

fn multiset(xs: &[String]) -> BTreeMap<&str, usize> {
    let mut m: BTreeMap<&str, usize> = BTreeMap::new();
    for x in xs {
        *m.entry(x.as_str()).or_default() += 1;
    }
    m
}

/// Instance-level P/R/F1 over multisets and category coverage
/// `|pred ∩ real| / |real|` over sets.
pub fn metric_prf_coverage(
    pred: &[String],
    real: &[String],
    pred_categories: &BTreeSet<String>,
    real_categories: &BTreeSet<String>,
) -> Result<PrfCoverage> {
    if real_categories.is_empty() {
        return Err(Error::argument("coverage needs a non-empty real category set"));
    }
    let (p, r) = (multiset(pred), multiset(real));
    let tp: usize = p.iter().map(|(k, n)| (*n).min(r.get(k).copied().unwrap_or(0))).sum();
    let prf = prf_from_counts(tp, pred.len() - tp, real.len() - tp);
    let hit = real_categories.intersection(pred_categories).count();
    Ok(PrfCoverage {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        coverage: hit as f64 / real_categories.len() as f64,
        tp,
        fp: pred.len() - tp,
        fn_: real.len() - tp,
    })
}

pub const SSIM_WINDOW: u32 = 8;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Mean SSIM over every 8×8 window at stride 1, using population statistics.
/// Images narrower or shorter than a window are scored as one window of
/// their full size.
pub fn metric_ssim(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::argument(format!(
            "ssim needs equal sizes, got {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width() as usize, a.height() as usize);
    let ww = (SSIM_WINDOW as usize).min(w);
    let wh = (SSIM_WINDOW as usize).min(h);
    // Summed-area tables of a, b, a², b², ab with a zero border.
    let stride = w + 1;
    let mut tables = vec![[0f64; 5]; stride * (h + 1)];
    for y in 0..h {
        let mut row = [0f64; 5];
        for x in 0..w {
            let pa = a.pixels()[y * w + x] as f64;
            let pb = b.pixels()[y * w + x] as f64;
            let v = [pa, pb, pa * pa, pb * pb, pa * pb];
            for c in 0..5 {
                row[c] += v[c];
                tables[(y + 1) * stride + x + 1][c] = tables[y * stride + x + 1][c] + row[c];
            }
        }
    }
    let n = (ww * wh) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y in 0..=h - wh {
        for x in 0..=w - ww {
            let mut s = [0f64; 5];
            for (c, sc) in s.iter_mut().enumerate() {
                *sc = tables[(y + wh) * stride + x + ww][c] - tables[y * stride + x + ww][c]
                    - tables[(y + wh) * stride + x][c]
                    + tables[y * stride + x][c];
            }
            let (ma, mb) = (s[0] / n, s[1] / n);
            let va = (s[2] / n - ma * ma).max(0.0);
            let vb = (s[3] / n - mb * mb).max(0.0);
            let cov = s[4] / n - ma * mb;
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMode {
    Acc,
    #[serde(rename = "acc@1")]
    AccAt1,
    #[serde(rename = "acc@5")]
    AccAt5,
    MacroPrecision,
    MacroRecall,
}

impl AccuracyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(Self::Acc),
            "acc@1" => Ok(Self::AccAt1),
            "acc@5" => Ok(Self::AccAt5),
            "macro-precision" => Ok(Self::MacroPrecision),
            "macro-recall" => Ok(Self::MacroRecall),
            other => Err(Error::argument(format!("unknown accuracy mode {other:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Acc => "acc",
            Self::AccAt1 => "acc@1",
            Self::AccAt5 => "acc@5",
            Self::MacroPrecision => "macro-precision",
            Self::MacroRecall => "macro-recall",
        }
    }
}

/// Accuracy family over ranked class assertions (`answers[i][0]` is the
/// model's top choice; an empty list is an invalid answer).
///
/// `acc` and `acc@1` both score the top choice. Macro modes average over the
/// union of true and predicted classes; a class never predicted has
/// precision 0 and a class never true has recall 0.
pub fn metric_accuracy(answers: &[Vec<String>], truth: &[String], mode: AccuracyMode) -> Result<f64> {
    if answers.len() != truth.len() {
        return Err(Error::argument(format!(
            "{} answers for {} questions",
            answers.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let top_k = |k: usize| {
        answers
            .iter()
            .zip(truth)
            .filter(|(a, t)| a.iter().take(k).any(|x| x == *t))
            .count() as f64
            / truth.len() as f64
    };
    match mode {
        AccuracyMode::Acc | AccuracyMode::AccAt1 => Ok(top_k(1)),
        AccuracyMode::AccAt5 => Ok(top_k(5)),
        AccuracyMode::MacroPrecision | AccuracyMode::MacroRecall => {
            let mut classes: BTreeSet<&str> = truth.iter().map(String::as_str).collect();
            classes.extend(answers.iter().filter_map(|a| a.first()).map(String::as_str));
            let mut sum = 0.0;
            for c in &classes {
                let tp = answers
                    .iter()
                    .zip(truth)
                    .filter(|(a, t)| t.as_str() == *c && a.first().map(String::as_str) == Some(*c))
                    .count();
                let denom = if mode == AccuracyMode::MacroPrecision {
                    answers.iter().filter(|a| a.first().map(String::as_str) == Some(*c)).count()
                } else {
                    truth.iter().filter(|t| t.as_str() == *c).count()
                };
                if denom > 0 {
                    sum += tp as f64 / denom as f64;
                }
            }
            Ok(sum / classes.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_computed_retrieval() {
        let q = RankedQuery {
            ranked: ids(&["a", "b", "c", "d", "e"]),
            relevant: set(&["b"]),
        };
        let m = metric_retrieval(&[q], &[1, 3, 5]).unwrap();
        assert_eq!(m.recall[&1], 0.0);
        assert_eq!(m.recall[&3], 1.0);
        assert_eq!(m.map_at_5, 0.5);
        let ap = average_precision(&["x", "p", "q", "y"].map(String::from), &set(&["x", "y"]), 5);
        assert!((ap - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_relevance_is_excluded() {
        let qs = [
            RankedQuery { ranked: ids(&["a"]), relevant: set(&["a"]) },
            RankedQuery { ranked: ids(&["a"]), relevant: set(&[]) },
        ];
        let m = metric_retrieval(&qs, &[1]).unwrap();
        assert_eq!((m.evaluated, m.excluded), (1, 1));
        assert_eq!(m.recall[&1], 1.0);
    }

    #[test]
    fn mre_examples() {
        assert_eq!(metric_mre(&[3, 4], &[3, 4]).unwrap().mre, 0.0);
        assert!((metric_mre(&[10, 4], &[8, 5]).unwrap().mre - 0.225).abs() < 1e-12);
        assert_eq!(metric_mre(&[5], &[0]).unwrap().mre, 1.0);
        let o = metric_mre(&[0, 2], &[1, 2]).unwrap();
        assert_eq!((o.evaluated, o.excluded_zero_gt, o.mre), (1, 1, 0.0));
        assert!(metric_mre(&[1], &[]).is_err());
    }

    #[test]
    fn miou_examples() {
        assert_eq!(metric_miou(&[[0, 0, 10, 10]], &[[0, 0, 10, 10]]), 1.0);
        assert!((metric_miou(&[[0, 0, 10, 10]], &[[5, 0, 15, 10]]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(metric_miou(&[[0, 0, 10, 10]], &[[20, 20, 30, 30]]), 0.0);
        assert_eq!(metric_miou(&[], &[]), 1.0);
        assert_eq!(metric_miou(&[[0, 0, 10, 10]], &[]), 0.0);
    }

    #[test]
    fn prf_examples() {
        let pred = ids(&["A", "B", "X"]);
        let real = ids(&["A", "B", "C", "D"]);
        let r = metric_prf_coverage(&pred, &real, &set(&["A", "B", "X"]), &set(&["A", "B", "C", "D"])).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (2, 1, 2));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 0.571428).abs() < 1e-5);
        assert_eq!(r.coverage, 0.5);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        let perfect = metric_prf_coverage(&real, &real, &set(&["A"]), &set(&["A"])).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1, perfect.coverage), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn ssim_conventions() {
        let a = RasterImage::filled(20, 12, 90);
        assert!((metric_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut g = RasterImage::filled(16, 16, 255);
        for i in 3..13 {
            g.set(i, i, 0);
            g.set(i, 8, 0);
        }
        assert!((metric_ssim(&g, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!(metric_ssim(&g, &g.inverted()).unwrap() < 0.2);
        assert!(metric_ssim(&g, &a).is_err());
        let tiny = RasterImage::filled(3, 2, 7);
        assert!((metric_ssim(&tiny, &tiny).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_examples() {
        let truth = ids(&["A", "B", "C", "D"]);
        let answers: Vec<Vec<String>> = vec![ids(&["A"]), ids(&["B"]), ids(&["C"]), ids(&["A"])];
        assert_eq!(metric_accuracy(&answers, &truth, AccuracyMode::Acc).unwrap(), 0.75);
        let ranked = vec![ids(&["x", "y", "A", "z", "w"])];
        let t = ids(&["A"]);
        assert_eq!(metric_accuracy(&ranked, &t, AccuracyMode::AccAt1).unwrap(), 0.0);
        assert_eq!(metric_accuracy(&ranked, &t, AccuracyMode::AccAt5).unwrap(), 1.0);
        let perfect: Vec<Vec<String>> = truth.iter().map(|t| vec![t.clone()]).collect();
        for mode in ["acc", "acc@1", "acc@5", "macro-precision", "macro-recall"] {
            let m = AccuracyMode::parse(mode).unwrap();
            assert_eq!(metric_accuracy(&perfect, &truth, m).unwrap(), 1.0);
        }
        assert!(AccuracyMode::parse("top-3").is_err());
    }
}
