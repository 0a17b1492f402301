//! Multi-label action quality over gated, one-to-one matched actor pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::matching::{iou, match_frame};
use crate::model::{ActionLabelSet, ActorId, ActorObservation, Keyframe, VideoRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub video_id: String,
    pub keyframe: Keyframe,
    pub gt_actor: ActorId,
    pub pred_actor: ActorId,
    pub iou: f64,
    pub gt_labels: ActionLabelSet,
    pub pred_labels: ActionLabelSet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchedPairSet {
    pub pairs: Vec<MatchedPair>,
}

impl MatchedPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn extend(&mut self, other: MatchedPairSet) {
        self.pairs.extend(other.pairs);
    }
}

/// Per keyframe: gated cost matrix, optimal assignment, gate filter.
///
/// `score_cutoff`, when set, drops predictions scoring below it first.
pub fn match_pairs(
    gt: &VideoRecord,
    pred: &VideoRecord,
    iou_threshold: f64,
    score_cutoff: Option<f64>,
) -> MatchedPairSet {
    let mut out = MatchedPairSet::default();
    let keyframes: BTreeSet<Keyframe> = gt.keyframes().collect();
    for kf in keyframes {
        let gframe = gt.frame(kf);
        let pframe: Vec<ActorObservation> = match score_cutoff {
            Some(cut) => pred.frame(kf).iter().filter(|o| o.score >= cut).cloned().collect(),
            None => pred.frame(kf).to_vec(),
        };
        for (g, p) in match_frame(gframe, &pframe, iou_threshold) {
            let (go, po) = (&gframe[g], &pframe[p]);
            out.pairs.push(MatchedPair {
                video_id: gt.video_id.clone(),
                keyframe: kf,
                gt_actor: go.actor_id,
                pred_actor: po.actor_id,
                iou: iou(&go.bbox, &po.bbox),
                gt_labels: go.actions.clone(),
                pred_labels: po.actions.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingLoss {
    /// `None` when no pair survived the gate.
    pub value: Option<f64>,
    pub reason: Option<String>,
    /// Total XOR disagreements over all pairs and labels.
    pub xor_bits: u64,
    pub n_pairs: usize,
    pub n_labels: u16,
}

/// XOR disagreements between two label sets as length-`n_labels` indicators.
pub fn xor_count(a: &ActionLabelSet, b: &ActionLabelSet, n_labels: u16) -> u64 {
    a.to_indicator(n_labels)
        .into_iter()
        .zip(b.to_indicator(n_labels))
        .filter(|(x, y)| x != y)
        .count() as u64
}

pub fn hamming_loss_from_counts(xor_bits: u64, n_pairs: usize, n_labels: u16) -> HammingLoss {
    if n_pairs == 0 {
        return HammingLoss {
            value: None,
            reason: Some("no pairs at IoU >= threshold".into()),
            xor_bits,
            n_pairs,
            n_labels,
        };
    }
    HammingLoss {
        value: Some(xor_bits as f64 / (n_pairs as f64 * n_labels as f64)),
        reason: None,
        xor_bits,
        n_pairs,
        n_labels,
    }
}

/// Mean per-label XOR disagreement over matched pairs.
pub fn hamming_loss(pairs: &MatchedPairSet, n_labels: u16) -> HammingLoss {
    let bits = pairs
        .pairs
        .iter()
        .map(|p| xor_count(&p.gt_labels, &p.pred_labels, n_labels))
        .sum();
    hamming_loss_from_counts(bits, pairs.len(), n_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, Role};

    fn rec(role: Role, items: &[(ActorId, BoundingBox, &[u16])]) -> VideoRecord {
        let mut r = VideoRecord::new("v", role);
        for (id, b, labels) in items {
            r.push(ActorObservation::gt("v", 0, *b, *id, labels.iter().copied().collect()));
        }
        r
    }

    #[test]
    fn overlapping_actors_each_get_their_own_prediction() {
        // GT boxes overlap each other above the gate; each prediction sits on one GT.
        let g0 = BoundingBox::new_unchecked(0.10, 0.1, 0.50, 0.9);
        let g1 = BoundingBox::new_unchecked(0.15, 0.1, 0.55, 0.9);
        let p0 = BoundingBox::new_unchecked(0.10, 0.1, 0.50, 0.88);
        let p1 = BoundingBox::new_unchecked(0.15, 0.1, 0.55, 0.88);
        assert!(iou(&g0, &g1) > 0.5);
        let gt = rec(Role::Gt, &[(0, g0, &[1]), (1, g1, &[2])]);
        let pred = rec(Role::Pred, &[(10, p1, &[2]), (11, p0, &[1])]);
        let pairs = match_pairs(&gt, &pred, 0.5, None);
        let got: Vec<_> = pairs.pairs.iter().map(|p| (p.gt_actor, p.pred_actor)).collect();
        assert_eq!(got, vec![(0, 11), (1, 10)]);
        assert_eq!(hamming_loss(&pairs, 80).value, Some(0.0));
    }

    #[test]
    fn weak_overlap_is_excluded() {
        let g = BoundingBox::new_unchecked(0.0, 0.0, 0.5, 1.0);
        let p = BoundingBox::new_unchecked(0.0, 0.0, 0.2, 1.0);
        let pairs = match_pairs(&rec(Role::Gt, &[(0, g, &[1])]), &rec(Role::Pred, &[(0, p, &[1])]), 0.5, None);
        assert!(pairs.is_empty());
        let hl = hamming_loss(&pairs, 80);
        assert_eq!(hl.value, None);
        assert!(hl.reason.is_some());
    }

    #[test]
    fn empty_frame_contributes_nothing() {
        let g = BoundingBox::new_unchecked(0.0, 0.0, 0.5, 1.0);
        let gt = rec(Role::Gt, &[(0, g, &[1])]);
        assert!(match_pairs(&gt, &VideoRecord::new("v", Role::Pred), 0.5, None).is_empty());
    }

    #[test]
    fn hamming_counts() {
        let a: ActionLabelSet = [1, 2, 3].into();
        let b: ActionLabelSet = [2, 4].into();
        assert_eq!(xor_count(&a, &b, 80), 3);
        assert_eq!(hamming_loss_from_counts(1, 2, 80).value, Some(0.00625));
        let all: ActionLabelSet = (1..=80).collect();
        let none = ActionLabelSet::new();
        assert_eq!(xor_count(&all, &none, 80), 80);
    }

    #[test]
    fn score_cutoff_filters_predictions() {
        let g = BoundingBox::new_unchecked(0.0, 0.0, 0.5, 1.0);
        let mut pred = VideoRecord::new("v", Role::Pred);
        pred.push(ActorObservation::pred("v", 0, g, 0, [1].into(), 0.2));
        let gt = rec(Role::Gt, &[(0, g, &[1])]);
        assert_eq!(match_pairs(&gt, &pred, 0.5, None).len(), 1);
        assert_eq!(match_pairs(&gt, &pred, 0.5, Some(0.5)).len(), 0);
    }
}
