//! Independent reference computations used by the integration tests. They
//! enumerate instead of optimizing, so they are only fit for small inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use asad_core::matching::{exact_sum, iou, CostMatrix};
use asad_core::{ActionLabelSet, ActorId, ActorObservation, BoundingBox, Role, VideoRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum total over every injective assignment of the smaller side into
/// the larger, each total summed exactly.
type Lookup<'a> = Box<dyn Fn(usize, usize) -> f64 + 'a>;

pub fn brute_force_min_cost(cost: &CostMatrix) -> f64 {
    let (r, c) = (cost.rows(), cost.cols());
    if r == 0 || c == 0 {
        return 0.0;
    }
    let (small, large, get): (usize, usize, Lookup) = if r <= c {
        (r, c, Box::new(|i, j| cost.get(i, j)))
    } else {
        (c, r, Box::new(|i, j| cost.get(j, i)))
    };
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(small);
    let mut used = vec![false; large];
    fn rec(
        i: usize,
        small: usize,
        large: usize,
        get: &dyn Fn(usize, usize) -> f64,
        chosen: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut f64,
    ) {
        if i == small {
            let total = exact_sum(chosen.iter().enumerate().map(|(a, &b)| get(a, b)));
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                chosen.push(j);
                rec(i + 1, small, large, get, chosen, used, best);
                chosen.pop();
                used[j] = false;
            }
        }
    }
    rec(0, small, large, &*get, &mut chosen, &mut used, &mut best);
    best
}

/// Largest one-to-one set of `(gt, pred)` pairs with IoU at or above `thr`,
/// by exhaustive search.
pub fn max_matching(gt: &[BoundingBox], pred: &[BoundingBox], thr: f64) -> usize {
    fn rec(p: usize, gt: &[BoundingBox], pred: &[BoundingBox], thr: f64, used: &mut [bool]) -> usize {
        if p == pred.len() {
            return 0;
        }
        let mut best = rec(p + 1, gt, pred, thr, used);
        for g in 0..gt.len() {
            if !used[g] && iou(&gt[g], &pred[p]) >= thr {
                used[g] = true;
                best = best.max(1 + rec(p + 1, gt, pred, thr, used));
                used[g] = false;
            }
        }
        best
    }
    rec(0, gt, pred, thr, &mut vec![false; gt.len()])
}

/// AP by sweeping the confidence threshold over every distinct score: at
/// each threshold the kept predictions are matched per keyframe by maximum
/// matching, giving one (recall, precision) point. Precision at recall `r`
/// is interpolated as the best precision among points with recall at least
/// `r`, and the area sums over each recall increase.
pub fn threshold_sweep_ap(gt: &[VideoRecord], pred: &[VideoRecord], thr: f64) -> Option<f64> {
    let n_gt: usize = gt.iter().map(VideoRecord::len).sum();
    if n_gt == 0 {
        return None;
    }
    let scores: BTreeSet<u64> = pred.iter().flat_map(|r| r.observations().map(|o| o.score.to_bits())).collect();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for bits in scores {
        let t = f64::from_bits(bits);
        let (mut tp, mut kept) = (0usize, 0usize);
        for g in gt {
            let p = pred.iter().find(|p| p.video_id == g.video_id);
            for kf in g.keyframes() {
                let gb: Vec<BoundingBox> = g.frame(kf).iter().map(|o| o.bbox).collect();
                let pb: Vec<BoundingBox> = p
                    .map(|p| p.frame(kf).iter().filter(|o| o.score >= t).map(|o| o.bbox).collect())
                    .unwrap_or_default();
                tp += max_matching(&gb, &pb, thr);
            }
        }
        for p in pred {
            kept += p.observations().filter(|o| o.score >= t).count();
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / kept as f64));
    }
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    recalls.sort_by(f64::total_cmp);
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let p_interp = points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        ap += (r - prev) * p_interp;
        prev = r;
    }
    Some(ap)
}

/// Best IDTP over every partial one-to-one pairing of GT and predicted
/// identities. A pair earns one per keyframe where both are present with
/// IoU at or above the gate.
pub fn brute_force_idtp(gt: &VideoRecord, pred: &VideoRecord, thr: f64) -> usize {
    let gids: Vec<ActorId> = gt.actor_ids().into_iter().collect();
    let pids: Vec<ActorId> = pred.actor_ids().into_iter().collect();
    let mut agree = vec![vec![0usize; pids.len()]; gids.len()];
    for (gi, &g) in gids.iter().enumerate() {
        for (pi, &p) in pids.iter().enumerate() {
            for kf in gt.keyframes() {
                let go = gt.frame(kf).iter().find(|o| o.actor_id == g);
                let po = pred.frame(kf).iter().find(|o| o.actor_id == p);
                if let (Some(go), Some(po)) = (go, po) {
                    if iou(&go.bbox, &po.bbox) >= thr {
                        agree[gi][pi] += 1;
                    }
                }
            }
        }
    }
    fn rec(g: usize, agree: &[Vec<usize>], used: &mut [bool]) -> usize {
        if g == agree.len() {
            return 0;
        }
        let mut best = rec(g + 1, agree, used);
        for p in 0..used.len() {
            if !used[p] {
                used[p] = true;
                best = best.max(agree[g][p] + rec(g + 1, agree, used));
                used[p] = false;
            }
        }
        best
    }
    rec(0, &agree, &mut vec![false; pids.len()])
}

pub fn bbox(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new_unchecked(x, y, x + w, y + h)
}

/// Random box inside the unit square.
pub fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let w = rng.random_range(0.05..0.5);
    let h = rng.random_range(0.05..0.5);
    let x = rng.random_range(0.0..=1.0 - w);
    let y = rng.random_range(0.0..=1.0 - h);
    bbox(x, y, w, h)
}

pub fn random_labels(rng: &mut ChaCha8Rng, n_labels: u16, allow_empty: bool) -> ActionLabelSet {
    let lo = if allow_empty { 0 } else { 1 };
    let k = rng.random_range(lo..=4);
    (0..k).map(|_| rng.random_range(1..=n_labels)).collect()
}

/// Small identity scenario: GT tracks drift around a few anchor positions;
/// predictions copy, nudge, relabel, drop or invent boxes.
pub fn random_identity_instance(rng: &mut ChaCha8Rng) -> (VideoRecord, VideoRecord) {
    let n_gt = rng.random_range(1..=6u32);
    let n_pred_ids = rng.random_range(1..=6u32);
    let n_kf = rng.random_range(1..=12u32);
    let anchors: Vec<BoundingBox> = (0..4).map(|k| bbox(0.05 + 0.22 * k as f64, 0.3, 0.18, 0.3)).collect();
    let mut gt = VideoRecord::new("v", Role::Gt);
    let mut pred = VideoRecord::new("v", Role::Pred);
    for kf in 0..n_kf {
        let mut used_pred: BTreeSet<ActorId> = BTreeSet::new();
        for g in 0..n_gt {
            if rng.random_bool(0.25) {
                continue;
            }
            let b = anchors[rng.random_range(0..anchors.len())];
            gt.push(ActorObservation::gt("v", kf, b, g, ActionLabelSet::from([1])));
            if rng.random_bool(0.8) {
                let pid = rng.random_range(0..n_pred_ids);
                if used_pred.insert(pid) {
                    let shift = rng.random_range(-0.1..0.1);
                    let pb = BoundingBox::new_unchecked(
                        (b.x1 + shift).max(0.0),
                        b.y1,
                        (b.x2 + shift).min(1.0),
                        b.y2,
                    );
                    pred.push(ActorObservation::pred("v", kf, pb, pid, ActionLabelSet::new(), 0.5));
                }
            }
        }
        if rng.random_bool(0.3) {
            let pid = rng.random_range(0..n_pred_ids);
            if used_pred.insert(pid) {
                pred.push(ActorObservation::pred("v", kf, random_box(rng), pid, ActionLabelSet::new(), 0.5));
            }
        }
    }
    (gt, pred)
}

/// Random record obeying every validation rule for its role.
pub fn random_record(rng: &mut ChaCha8Rng, video_id: &str, role: Role, n_labels: u16) -> VideoRecord {
    let mut r = VideoRecord::new(video_id, role)
        .with_n_labels(n_labels)
        .with_stride(rng.random_range(1..=30));
    let n_kf = rng.random_range(0..8u32);
    for _ in 0..n_kf {
        let kf = rng.random_range(0..1000u32);
        let ids: BTreeSet<ActorId> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..20)).collect();
        for id in ids {
            let b = random_box(rng);
            let o = match role {
                Role::Gt => ActorObservation::gt(video_id, kf, b, id, random_labels(rng, n_labels, false)),
                Role::Pred => {
                    let score = rng.random::<f64>();
                    ActorObservation::pred(video_id, kf, b, id, random_labels(rng, n_labels, true), score)
                }
            };
            if r.frame(kf).iter().all(|x| x.actor_id != id) {
                r.push(o);
            }
        }
    }
    r
}

/// Relabels predicted identities through `map`.
pub fn relabel(rec: &VideoRecord, map: &BTreeMap<ActorId, ActorId>) -> VideoRecord {
    let mut out = VideoRecord::new(rec.video_id.clone(), rec.role)
        .with_n_labels(rec.n_labels)
        .with_stride(rec.keyframe_stride);
    for o in rec.observations() {
        let mut o = o.clone();
        o.actor_id = map[&o.actor_id];
        out.push(o);
    }
    out
}
