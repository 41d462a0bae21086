//! Threshold detector evaluation: ground-truth labelling, classification,
//! confusion counts, ROC sweep and AUC.

use alloc::vec::Vec;

use crate::pipeline::FeatureSeries;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLDS: usize = 1000;

/// Activity intervals `[start, end)` in seconds, sorted and merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    intervals: Vec<(f64, f64)>,
}

impl GroundTruth {
    /// Sorts the intervals and merges any that overlap or touch.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(s, e)) = intervals
            .iter()
            .find(|(s, e)| !s.is_finite() || !e.is_finite() || e <= s)
        {
            return Err(Error::InvalidInterval(s, e));
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (s, e) in intervals {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Total time in `[start, end)` covered by the intervals.
    pub fn overlap(&self, start: f64, end: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(s, e)| (e.min(end) - s.max(start)).max(0.0))
            .sum()
    }

    /// Whether `t` lies inside any interval.
    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(s, e)| s <= t && t < e)
    }
}

/// `true` for windows whose overlap with the activity intervals is at least
/// `overlap_frac` of the window length.
pub fn label_windows(truth: &GroundTruth, series: &FeatureSeries, overlap_frac: f64) -> Vec<bool> {
    let w = series.window_length();
    series
        .window_starts()
        .iter()
        .map(|&s| truth.overlap(s, s + w) >= overlap_frac * w)
        .collect()
}

/// `Y_k = A*_k >= tau`.
pub fn classify(scores: &[f64], tau: f64) -> Vec<bool> {
    scores.iter().map(|&a| a >= tau).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// TP / (TP + FN); zero when there are no positives.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// FP / (FP + TN); zero when there are no negatives.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(predicted: &[bool], truth: &[bool]) -> Result<Confusion> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let mut c = Confusion::default();
    for (&y, &g) in predicted.iter().zip(truth) {
        match (y, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// One evaluated threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocSample {
    pub tau: f64,
    pub confusion: Confusion,
}

impl RocSample {
    pub fn tpr(&self) -> f64 {
        self.confusion.tpr()
    }

    pub fn fpr(&self) -> f64 {
        self.confusion.fpr()
    }
}

/// Result of a threshold sweep, one sample per threshold in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    samples: Vec<RocSample>,
}

impl RocCurve {
    pub fn samples(&self) -> &[RocSample] {
        &self.samples
    }

    pub fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.tau)
    }

    /// Distinct operating points plus the `(0,0)` and `(1,1)` anchors, sorted
    /// by FPR then TPR. Thresholds with identical confusion cells collapse to
    /// one point.
    pub fn points(&self) -> Vec<RocPoint> {
        let mut cells: Vec<Confusion> = self.samples.iter().map(|s| s.confusion).collect();
        cells.sort_by_key(|c| (c.fp, c.tp));
        cells.dedup();
        let mut points = Vec::with_capacity(cells.len() + 2);
        points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
        points.extend(cells.iter().map(|c| RocPoint { fpr: c.fpr(), tpr: c.tpr() }));
        points.push(RocPoint { fpr: 1.0, tpr: 1.0 });
        points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
        points.dedup();
        points
    }
}

/// Evenly spaced thresholds from `min` to `max` inclusive.
pub fn linear_thresholds(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![min],
        _ => {
            let step = (max - min) / (n - 1) as f64;
            (0..n)
                .map(|j| if j == n - 1 { max } else { min + j as f64 * step })
                .collect()
        }
    }
}

/// Threshold sweep over `n_thresholds` values spanning the score range.
pub fn roc(scores: &[f64], labels: &[bool], n_thresholds: usize) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let (min, max) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !min.is_finite() || !max.is_finite() {
        if scores.is_empty() {
            return Err(Error::SingleClass);
        }
        return Err(Error::InvalidParameter("scores must be finite"));
    }
    roc_at(scores, labels, &linear_thresholds(min, max, n_thresholds))
}

/// Sweep over an explicit threshold list.
pub fn roc_at(scores: &[f64], labels: &[bool], thresholds: &[f64]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut positives: Vec<f64> = scores.iter().zip(labels).filter(|(_, &g)| g).map(|(&s, _)| s).collect();
    let mut negatives: Vec<f64> = scores.iter().zip(labels).filter(|(_, &g)| !g).map(|(&s, _)| s).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }
    positives.sort_by(f64::total_cmp);
    negatives.sort_by(f64::total_cmp);
    let at_least = |sorted: &[f64], tau: f64| sorted.len() - sorted.partition_point(|&v| v < tau);

    let samples = thresholds
        .iter()
        .map(|&tau| {
            let tp = at_least(&positives, tau);
            let fp = at_least(&negatives, tau);
            RocSample {
                tau,
                confusion: Confusion { tp, fp, tn: negatives.len() - fp, fn_: positives.len() - tp },
            }
        })
        .collect();
    Ok(RocCurve { samples })
}

/// Trapezoidal area under the curve's collapsed, FPR-sorted point set.
pub fn auc(curve: &RocCurve) -> f64 {
    let points = curve.points();
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
        .sum()
}

/// Labels, scores and AUC for a feature series.
pub fn evaluate(
    series: &FeatureSeries,
    truth: &GroundTruth,
    overlap_frac: f64,
    n_thresholds: usize,
    exclude_invalid: bool,
) -> Result<Evaluation> {
    let labels = label_windows(truth, series, overlap_frac);
    let (scores, labels): (Vec<f64>, Vec<bool>) = series
        .values()
        .iter()
        .zip(labels)
        .zip(series.valid())
        .filter(|(_, &valid)| valid || !exclude_invalid)
        .map(|((&s, g), _)| (s, g))
        .unzip();
    let curve = roc(&scores, &labels, n_thresholds)?;
    let auc = auc(&curve);
    Ok(Evaluation { scores, labels, curve, auc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub curve: RocCurve,
    pub auc: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn series(starts: Vec<f64>, w: f64, values: Vec<f64>) -> FeatureSeries {
        let n = values.len();
        FeatureSeries::new(starts, w, values, vec![true; n]).unwrap()
    }

    #[test]
    fn labelling() {
        let s = series(vec![0.0, 3.0, 6.0], 3.0, vec![0.0; 3]);
        let whole = GroundTruth::new(vec![(3.0, 6.0)]).unwrap();
        assert_eq!(label_windows(&whole, &s, 0.5), vec![false, true, false]);
        assert_eq!(label_windows(&GroundTruth::default(), &s, 0.5), vec![false; 3]);
        // 40% of the window [3, 6) is 1.2 s.
        let partial = GroundTruth::new(vec![(3.0, 4.2)]).unwrap();
        assert_eq!(label_windows(&partial, &s, 0.5), vec![false; 3]);
        assert_eq!(label_windows(&partial, &s, 0.1), vec![false, true, false]);
        // A passage straddling two windows labels both at a low fraction.
        let walk = GroundTruth::new(vec![(4.5, 7.5)]).unwrap();
        assert_eq!(label_windows(&walk, &s, 0.1), vec![false, true, true]);
    }

    #[test]
    fn intervals_are_merged() {
        let g = GroundTruth::new(vec![(5.0, 6.0), (0.0, 2.0), (1.0, 3.0), (3.0, 4.0)]).unwrap();
        assert_eq!(g.intervals(), &[(0.0, 4.0), (5.0, 6.0)]);
        assert!(GroundTruth::new(vec![(2.0, 2.0)]).is_err());
        assert!(GroundTruth::new(vec![(0.0, f64::INFINITY)]).is_err());
        assert_eq!(g.overlap(1.0, 5.5), 3.5);
    }

    #[test]
    fn classify_examples() {
        let a = [0.1, 0.5];
        assert_eq!(classify(&a, -1.0), vec![true, true]);
        assert_eq!(classify(&a, 1.5), vec![false, false]);
        assert_eq!(classify(&a, 0.5), vec![false, true]);
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[true, false], &[true, false]).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 0, tn: 1, fn_: 0 });
        let c = confusion(&[false, true], &[true, false]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        let c = confusion(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(c.total(), 4);
        assert!(confusion(&[true], &[]).is_err());
    }

    #[test]
    fn separated_scores_reach_top_left() {
        let scores = [0.1, 0.2, 0.3, 0.8, 0.9];
        let labels = [false, false, false, true, true];
        let curve = roc(&scores, &labels, 1000).unwrap();
        assert!(curve.points().contains(&RocPoint { fpr: 0.0, tpr: 1.0 }));
        assert_eq!(auc(&curve), 1.0);
        assert_eq!(curve.samples().len(), 1000);
    }

    #[test]
    fn single_class_is_an_error() {
        assert_eq!(roc(&[1.0, 2.0], &[true, true], 10), Err(Error::SingleClass));
        assert_eq!(roc(&[1.0, 2.0], &[false, false], 10), Err(Error::SingleClass));
        assert_eq!(roc(&[], &[], 10), Err(Error::SingleClass));
    }

    /// Six windows, thresholds enumerated by hand.
    ///
    /// scores 1 2 3 4 5 6, labels 0 1 0 1 1 0 (P = 3, N = 3); grid of 6 from
    /// 1 to 6 hits every score exactly.
    #[test]
    fn six_window_table() {
        let scores = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let labels = [false, true, false, true, true, false];
        let curve = roc(&scores, &labels, 6).unwrap();
        let table: Vec<(f64, f64, f64)> = curve.samples().iter().map(|s| (s.tau, s.tpr(), s.fpr())).collect();
        let third = 1.0 / 3.0;
        let expected = [
            (1.0, 1.0, 1.0),
            (2.0, 1.0, 2.0 * third),
            (3.0, 2.0 * third, 2.0 * third),
            (4.0, 2.0 * third, third),
            (5.0, third, third),
            (6.0, 0.0, third),
        ];
        for (got, want) in table.iter().zip(expected) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-15 && (got.2 - want.2).abs() < 1e-15, "{got:?} vs {want:?}");
        }
        // Pairwise: positives {2,4,5} vs negatives {1,3,6}: wins 1+2+2 = 5 of 9.
        assert!((auc(&curve) - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn vertical_steps_do_not_inflate_area() {
        // A positive and a negative share the lowest score, a second positive
        // sits above them alone.
        let scores = [0.0, 0.0, 1.0];
        let labels = [true, false, true];
        let curve = roc(&scores, &labels, 2).unwrap();
        // Exact pairwise: (1 tie -> 0.5) + (1 win) over 2 pairs = 0.75.
        assert!((auc(&curve) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn anchors_give_diagonal() {
        // All scores equal: the only operating point is (1,1).
        let curve = roc(&[0.5; 4], &[true, false, true, false], 1000).unwrap();
        assert_eq!(curve.points(), vec![RocPoint { fpr: 0.0, tpr: 0.0 }, RocPoint { fpr: 1.0, tpr: 1.0 }]);
        assert_eq!(auc(&curve), 0.5);
    }

    #[test]
    fn linear_grid_endpoints() {
        let g = linear_thresholds(0.1, 0.7, 1000);
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[999], 0.7);
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn evaluate_can_drop_invalid_windows() {
        let s = FeatureSeries::new(
            vec![0.0, 3.0, 6.0, 9.0],
            3.0,
            vec![0.0, 5.0, 1.0, 0.0],
            vec![true, true, true, false],
        )
        .unwrap();
        let truth = GroundTruth::new(vec![(3.0, 6.0), (9.0, 12.0)]).unwrap();
        let all = evaluate(&s, &truth, 0.5, 1000, false).unwrap();
        assert_eq!(all.labels, vec![false, true, false, true]);
        let valid_only = evaluate(&s, &truth, 0.5, 1000, true).unwrap();
        assert_eq!(valid_only.scores.len(), 3);
        assert_eq!(valid_only.auc, 1.0);
    }
}
