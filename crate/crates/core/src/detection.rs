//! Single-class detection quality: TP/FP/FN tallies, precision/recall and
//! average precision over one pooled, score-ranked prediction list.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::matching::iou;
use crate::model::{BoundingBox, VideoRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionTally {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl DetectionTally {
    pub fn add(&mut self, other: &DetectionTally) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Tally for one keyframe plus a TP flag per prediction (input order).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTally {
    pub tally: DetectionTally,
    pub is_tp: Vec<bool>,
}

/// Greedy matching in descending score order: each prediction takes the
/// unmatched ground-truth box with the highest IoU, provided that IoU
/// reaches `iou_threshold`. Score ties keep input order.
pub fn tally_frame(gt: &[BoundingBox], pred: &[(BoundingBox, f64)], iou_threshold: f64) -> FrameTally {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].1.total_cmp(&pred[a].1));
    let mut taken = vec![false; gt.len()];
    let mut is_tp = vec![false; pred.len()];
    for &p in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gbox) in gt.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(gbox, &pred[p].0);
            if v >= iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            is_tp[p] = true;
        }
    }
    let tp = is_tp.iter().filter(|&&t| t).count();
    FrameTally {
        tally: DetectionTally {
            tp,
            fp: pred.len() - tp,
            fn_: gt.len() - tp,
        },
        is_tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Set when TP + FP = 0; precision is then reported as 0.
    pub no_predictions: bool,
    /// Set when TP + FN = 0; recall is then reported as 0.
    pub no_ground_truth: bool,
}

pub fn precision_recall(t: &DetectionTally) -> PrecisionRecall {
    let predicted = t.tp + t.fp;
    let actual = t.tp + t.fn_;
    PrecisionRecall {
        precision: if predicted > 0 { t.tp as f64 / predicted as f64 } else { 0.0 },
        recall: if actual > 0 { t.tp as f64 / actual as f64 } else { 0.0 },
        no_predictions: predicted == 0,
        no_ground_truth: actual == 0,
    }
}

/// One ranked prediction on the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub rank: usize,
    pub score: f64,
    /// Cumulative true positives down to this rank.
    pub tp: usize,
    /// Cumulative false positives down to this rank.
    pub fp: usize,
    pub recall: f64,
    pub precision: f64,
    pub p_interp: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    /// `None` when there is no ground truth at all.
    pub ap: Option<f64>,
    pub reason: Option<String>,
    pub curve: PrCurve,
    pub tally: DetectionTally,
    /// Adjacent equal scores in the ranking, resolved by input order.
    pub score_ties: usize,
}

/// Builds the interpolated curve from `(score, is_tp)` entries already in
/// ranking order and integrates it.
fn integrate(ranked: &[(f64, bool)], n_gt: usize) -> (f64, PrCurve) {
    let mut points = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &(score, hit)) in ranked.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push(PrPoint {
            rank: k + 1,
            score,
            tp,
            fp,
            recall: tp as f64 / n_gt as f64,
            precision: tp as f64 / (tp + fp) as f64,
            p_interp: 0.0,
        });
    }
    // p_interp(r) = max precision over points with recall >= r.
    let mut best = 0.0f64;
    for p in points.iter_mut().rev() {
        best = best.max(p.precision);
        p.p_interp = best;
    }
    let mut k = 0;
    while k < points.len() {
        let mut end = k;
        while end + 1 < points.len() && points[end + 1].recall == points[k].recall {
            end += 1;
        }
        let group_max = points[k].p_interp;
        for p in &mut points[k..=end] {
            p.p_interp = group_max;
        }
        k = end + 1;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in &points {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * p.p_interp;
            prev_recall = p.recall;
        }
    }
    (ap.clamp(0.0, 1.0), PrCurve { points })
}

/// Average precision over every keyframe of every video, pooled into one
/// ranking. Videos are paired by id; unpaired predictions count as FP and
/// unpaired ground truth as FN.
pub fn average_precision(gt: &[VideoRecord], pred: &[VideoRecord], iou_threshold: f64) -> ApResult {
    let video_ids: BTreeSet<&str> = gt
        .iter()
        .chain(pred)
        .map(|r| r.video_id.as_str())
        .collect();
    let mut entries: Vec<(f64, bool)> = Vec::new();
    let mut tally = DetectionTally::default();
    for vid in video_ids {
        let g = gt.iter().find(|r| r.video_id == vid);
        let p = pred.iter().find(|r| r.video_id == vid);
        let keyframes: BTreeSet<u32> = g
            .into_iter()
            .chain(p)
            .flat_map(|r| r.keyframes())
            .collect();
        for kf in keyframes {
            let gboxes: Vec<BoundingBox> = g.map_or(Vec::new(), |r| r.frame(kf).iter().map(|o| o.bbox).collect());
            let pboxes: Vec<(BoundingBox, f64)> =
                p.map_or(Vec::new(), |r| r.frame(kf).iter().map(|o| (o.bbox, o.score)).collect());
            let ft = tally_frame(&gboxes, &pboxes, iou_threshold);
            tally.add(&ft.tally);
            entries.extend(pboxes.iter().zip(&ft.is_tp).map(|(pb, &hit)| (pb.1, hit)));
        }
    }
    // Stable sort keeps input order among equal scores.
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let score_ties = entries.windows(2).filter(|w| w[0].0 == w[1].0).count();
    let n_gt = tally.tp + tally.fn_;
    if n_gt == 0 {
        return ApResult {
            ap: None,
            reason: Some("no ground-truth boxes".into()),
            curve: PrCurve::default(),
            tally,
            score_ties,
        };
    }
    let (ap, curve) = integrate(&entries, n_gt);
    ApResult {
        ap: Some(ap),
        reason: None,
        curve,
        tally,
        score_ties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActorObservation, Role};

    fn bx(x: f64) -> BoundingBox {
        BoundingBox::new_unchecked(x, 0.1, x + 0.1, 0.3)
    }

    #[test]
    fn single_match() {
        let t = tally_frame(&[bx(0.1)], &[(BoundingBox::new_unchecked(0.1, 0.1, 0.2, 0.29), 0.9)], 0.5);
        assert_eq!(t.tally, DetectionTally { tp: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn double_detection_is_penalized() {
        let t = tally_frame(&[bx(0.1)], &[(bx(0.1), 0.8), (bx(0.101), 0.9)], 0.5);
        assert_eq!(t.tally, DetectionTally { tp: 1, fp: 1, fn_: 0 });
        // the higher-scoring prediction claims the box
        assert_eq!(t.is_tp, vec![false, true]);
    }

    #[test]
    fn misses_only() {
        let t = tally_frame(&[bx(0.1), bx(0.5)], &[], 0.5);
        assert_eq!(t.tally, DetectionTally { tp: 0, fp: 0, fn_: 2 });
    }

    #[test]
    fn precision_recall_cases() {
        let pr = precision_recall(&DetectionTally { tp: 8, fp: 2, fn_: 2 });
        assert_eq!((pr.precision, pr.recall), (0.8, 0.8));
        let pr = precision_recall(&DetectionTally { tp: 0, fp: 0, fn_: 3 });
        assert_eq!(pr.precision, 0.0);
        assert!(pr.no_predictions);
        let pr = precision_recall(&DetectionTally { tp: 5, fp: 0, fn_: 0 });
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
    }

    fn record(role: Role, items: &[(u32, f64, f64)]) -> VideoRecord {
        let mut r = VideoRecord::new("v", role);
        for (i, &(kf, x, score)) in items.iter().enumerate() {
            let mut o = ActorObservation::gt("v", kf, bx(x), i as u32, [1].into());
            o.score = score;
            r.push(o);
        }
        r
    }

    #[test]
    fn no_ground_truth_is_null() {
        let gt = VideoRecord::new("v", Role::Gt);
        let pred = record(Role::Pred, &[(0, 0.1, 0.5)]);
        let res = average_precision(&[gt], &[pred], 0.5);
        assert_eq!(res.ap, None);
        assert!(res.reason.is_some());
    }

    #[test]
    fn interpolated_precision_is_non_increasing() {
        let gt = record(Role::Gt, &[(0, 0.1, 1.0), (0, 0.5, 1.0), (1, 0.1, 1.0)]);
        let pred = record(
            Role::Pred,
            &[(0, 0.1, 0.9), (0, 0.8, 0.85), (0, 0.5, 0.7), (1, 0.3, 0.6), (1, 0.1, 0.5)],
        );
        let res = average_precision(&[gt], &[pred], 0.5);
        let pts = &res.curve.points;
        assert!(pts.windows(2).all(|w| w[1].p_interp <= w[0].p_interp));
        assert!(pts.windows(2).all(|w| w[1].recall >= w[0].recall));
    }
}
