mod oracles;

use asad_core::detection::average_precision;
use asad_core::{ActionLabelSet, ActorObservation, BoundingBox, Role, VideoRecord};
use oracles::{bbox, rng, threshold_sweep_ap};
use proptest::prelude::*;
use rand::Rng;

fn gt_record(boxes: &[(u32, BoundingBox)]) -> VideoRecord {
    let mut r = VideoRecord::new("v", Role::Gt);
    for (i, &(kf, b)) in boxes.iter().enumerate() {
        r.push(ActorObservation::gt("v", kf, b, i as u32, ActionLabelSet::from([1])));
    }
    r
}

fn pred_record(boxes: &[(u32, BoundingBox, f64)]) -> VideoRecord {
    let mut r = VideoRecord::new("v", Role::Pred);
    for (i, &(kf, b, s)) in boxes.iter().enumerate() {
        r.push(ActorObservation::pred("v", kf, b, i as u32, ActionLabelSet::new(), s));
    }
    r
}

const FAR: f64 = 0.7;

#[test]
fn one_gt_with_a_higher_scoring_false_positive() {
    let g = bbox(0.1, 0.1, 0.2, 0.2);
    let gt = gt_record(&[(0, g)]);
    let pred = pred_record(&[(0, bbox(FAR, FAR, 0.2, 0.2), 0.95), (0, g, 0.90)]);
    let res = average_precision(std::slice::from_ref(&gt), std::slice::from_ref(&pred), 0.5);
    let points: Vec<(f64, f64)> = res.curve.points.iter().map(|p| (p.recall, p.precision)).collect();
    assert_eq!(points, vec![(0.0, 0.0), (1.0, 0.5)]);
    assert!((res.ap.unwrap() - 0.5).abs() < 1e-9);
    assert!((threshold_sweep_ap(&[gt], &[pred], 0.5).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn two_gt_with_a_false_positive_between_hits() {
    let (g1, g2) = (bbox(0.1, 0.1, 0.2, 0.2), bbox(0.5, 0.1, 0.2, 0.2));
    let gt = gt_record(&[(0, g1), (0, g2)]);
    let pred = pred_record(&[(0, g1, 0.9), (0, bbox(0.1, FAR, 0.2, 0.2), 0.8), (0, g2, 0.7)]);
    let res = average_precision(std::slice::from_ref(&gt), std::slice::from_ref(&pred), 0.5);
    let points: Vec<(f64, f64)> = res.curve.points.iter().map(|p| (p.recall, p.precision)).collect();
    assert_eq!(points, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)]);
    assert_eq!(res.curve.points[2].p_interp, 2.0 / 3.0);
    assert!((res.ap.unwrap() - 5.0 / 6.0).abs() < 1e-9);
    assert!((threshold_sweep_ap(&[gt], &[pred], 0.5).unwrap() - 5.0 / 6.0).abs() < 1e-9);
}

#[test]
fn perfect_detector_and_missing_ground_truth() {
    let boxes = [(0, bbox(0.1, 0.1, 0.2, 0.2)), (1, bbox(0.3, 0.3, 0.2, 0.2))];
    let gt = gt_record(&boxes);
    let pred = pred_record(&[(0, boxes[0].1, 0.6), (1, boxes[1].1, 0.4)]);
    assert_eq!(average_precision(&[gt], std::slice::from_ref(&pred), 0.5).ap, Some(1.0));
    let none = average_precision(&[], &[pred], 0.5);
    assert_eq!(none.ap, None);
    assert!(none.reason.is_some());
}

/// GT boxes sit in separate grid cells and every prediction overlaps at most
/// one of them, so greedy matching and maximum matching agree.
fn separated_instance(seed: u64) -> (VideoRecord, VideoRecord) {
    let mut r = rng(seed);
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    let mut used_scores = std::collections::BTreeSet::new();
    for kf in 0..r.random_range(1..4u32) {
        for cell in 0..4 {
            let cell_box = bbox(0.25 * cell as f64 + 0.02, 0.1, 0.2, 0.3);
            let has_gt = r.random_bool(0.7);
            if has_gt {
                gt.push((kf, cell_box));
            }
            for _ in 0..r.random_range(0..3) {
                let shift = r.random_range(0.0..0.08);
                let b = bbox(cell_box.x1 + shift, 0.1, 0.2 - shift, 0.3);
                let mut s = r.random_range(0..1000) as f64 / 1000.0;
                while !used_scores.insert(s.to_bits()) {
                    s += 1e-6;
                }
                pred.push((kf, b, s));
            }
        }
    }
    (gt_record(&gt), pred_record(&pred))
}

#[test]
fn threshold_sweep_agrees_on_random_instances() {
    for seed in 0..150 {
        let (gt, pred) = separated_instance(seed);
        let ours = average_precision(std::slice::from_ref(&gt), std::slice::from_ref(&pred), 0.5).ap;
        let oracle = threshold_sweep_ap(&[gt], &[pred], 0.5);
        match (ours, oracle) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}"),
            (a, b) => assert_eq!(a, b, "seed {seed}"),
        }
    }
}

proptest! {
    #[test]
    fn ap_stays_in_unit_interval(seed in any::<u64>()) {
        let (gt, pred) = separated_instance(seed);
        if let Some(ap) = average_precision(&[gt], &[pred], 0.5).ap {
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }

    #[test]
    fn lowest_scoring_fp_never_changes_ap(seed in any::<u64>()) {
        let (gt, pred) = separated_instance(seed);
        let before = average_precision(std::slice::from_ref(&gt), std::slice::from_ref(&pred), 0.5).ap;
        let mut more = pred.clone();
        more.push(ActorObservation::pred("v", 0, bbox(0.0, 0.8, 0.1, 0.1), 999, ActionLabelSet::new(), -0.0));
        let after = average_precision(&[gt], &[more], 0.5).ap;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn top_scoring_fp_never_raises_ap(seed in any::<u64>()) {
        let (gt, pred) = separated_instance(seed);
        let before = average_precision(std::slice::from_ref(&gt), std::slice::from_ref(&pred), 0.5).ap;
        let mut more = pred.clone();
        more.push(ActorObservation::pred("v", 0, bbox(0.0, 0.8, 0.1, 0.1), 999, ActionLabelSet::new(), 2.0));
        let after = average_precision(&[gt], &[more], 0.5).ap;
        if let (Some(b), Some(a)) = (before, after) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn p_interp_is_non_increasing(seed in any::<u64>()) {
        let (gt, pred) = separated_instance(seed);
        let res = average_precision(&[gt], &[pred], 0.5);
        for w in res.curve.points.windows(2) {
            prop_assert!(w[0].recall <= w[1].recall);
            prop_assert!(w[0].p_interp >= w[1].p_interp);
        }
    }
}
