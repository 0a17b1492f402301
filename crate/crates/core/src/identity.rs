//! Actor identification: IDF1 under the optimal identity pairing, mostly
//! tracked / mostly lost coverage, and identity switches.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::matching::{iou, linear_sum_assignment, match_frame, CostMatrix};
use crate::model::{build_tracklets, ActorId, Tracklet, VideoRecord};

/// Inclusive coverage ratio at or above which a track is mostly tracked.
pub const MOSTLY_TRACKED: f64 = 0.8;
/// Inclusive coverage ratio at or below which a track is mostly lost.
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMatchResult {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    /// `(gt actor, predicted actor)` pairs that share at least one IDTP.
    pub pairing: Vec<(ActorId, ActorId)>,
}

impl IdMatchResult {
    /// `2 IDTP / (2 IDTP + IDFP + IDFN)`; `None` when all counts are zero.
    pub fn idf1(&self) -> Option<f64> {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        (denom > 0).then(|| 2.0 * self.idtp as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Idf1Result {
    pub idf1: f64,
    /// Both records empty; IDF1 is reported as 1.0.
    pub vacuous: bool,
    pub matches: IdMatchResult,
}

/// Per-keyframe agreement counts between every GT and predicted identity.
struct IdentityOverlap {
    gt_ids: Vec<ActorId>,
    pred_ids: Vec<ActorId>,
    gt_len: Vec<usize>,
    pred_len: Vec<usize>,
    /// `agree[g][p]`: keyframes where both exist with IoU at or above the gate.
    agree: Vec<Vec<usize>>,
}

impl IdentityOverlap {
    fn new(gt: &VideoRecord, pred: &VideoRecord, iou_threshold: f64) -> Self {
        let gt_ids: Vec<ActorId> = gt.actor_ids().into_iter().collect();
        let pred_ids: Vec<ActorId> = pred.actor_ids().into_iter().collect();
        let gidx: BTreeMap<ActorId, usize> = gt_ids.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let pidx: BTreeMap<ActorId, usize> = pred_ids.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let mut gt_len = vec![0; gt_ids.len()];
        let mut pred_len = vec![0; pred_ids.len()];
        let mut agree = vec![vec![0; pred_ids.len()]; gt_ids.len()];
        for o in gt.observations() {
            gt_len[gidx[&o.actor_id]] += 1;
        }
        for o in pred.observations() {
            pred_len[pidx[&o.actor_id]] += 1;
        }
        for (kf, gframe) in gt.frames() {
            let pframe = pred.frame(kf);
            for go in gframe {
                for po in pframe {
                    if iou(&go.bbox, &po.bbox) >= iou_threshold {
                        agree[gidx[&go.actor_id]][pidx[&po.actor_id]] += 1;
                    }
                }
            }
        }
        Self {
            gt_ids,
            pred_ids,
            gt_len,
            pred_len,
            agree,
        }
    }
}

/// Identity-level min-cost assignment.
///
/// The square problem has one row per GT identity plus one per predicted
/// identity acting as its "unmatched" stand-in, and likewise for columns.
/// Pairing GT `g` with prediction `p` costs the misses plus false positives
/// left under that pairing; leaving either unmatched costs its full length.
fn identity_matching(ov: &IdentityOverlap) -> IdMatchResult {
    let (ng, np) = (ov.gt_ids.len(), ov.pred_ids.len());
    let total_gt: usize = ov.gt_len.iter().sum();
    let total_pred: usize = ov.pred_len.iter().sum();
    let forbidden = (total_gt + total_pred + 1) as f64;
    let n = ng + np;
    let cost = CostMatrix::from_fn(n, n, |i, j| match (i < ng, j < np) {
        (true, true) => (ov.gt_len[i] + ov.pred_len[j] - 2 * ov.agree[i][j]) as f64,
        (true, false) => {
            if j - np == i {
                ov.gt_len[i] as f64
            } else {
                forbidden
            }
        }
        (false, true) => {
            if i - ng == j {
                ov.pred_len[j] as f64
            } else {
                forbidden
            }
        }
        (false, false) => 0.0,
    });
    let mut idtp = 0;
    let mut pairing = Vec::new();
    for (i, j) in linear_sum_assignment(&cost) {
        if i < ng && j < np && ov.agree[i][j] > 0 {
            idtp += ov.agree[i][j];
            pairing.push((ov.gt_ids[i], ov.pred_ids[j]));
        }
    }
    IdMatchResult {
        idtp,
        idfp: total_pred - idtp,
        idfn: total_gt - idtp,
        pairing,
    }
}

/// IDTP/IDFP/IDFN for one video under the optimal identity pairing.
pub fn id_match(gt: &VideoRecord, pred: &VideoRecord, iou_threshold: f64) -> IdMatchResult {
    identity_matching(&IdentityOverlap::new(gt, pred, iou_threshold))
}

pub fn idf1(gt: &VideoRecord, pred: &VideoRecord, iou_threshold: f64) -> Idf1Result {
    let matches = id_match(gt, pred, iou_threshold);
    match matches.idf1() {
        Some(idf1) => Idf1Result {
            idf1,
            vacuous: false,
            matches,
        },
        None => Idf1Result {
            idf1: 1.0,
            vacuous: true,
            matches,
        },
    }
}

/// How much of one GT tracklet is covered by matched predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackCoverage {
    pub actor_id: ActorId,
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageClass {
    MostlyTracked,
    Partial,
    MostlyLost,
}

impl CoverageClass {
    /// Classifies `covered / total` with inclusive thresholds, in exact
    /// integer arithmetic so boundary ratios never round the wrong way.
    pub fn of(covered: usize, total: usize) -> Self {
        if covered * 5 >= total * 4 {
            Self::MostlyTracked
        } else if covered * 5 <= total {
            Self::MostlyLost
        } else {
            Self::Partial
        }
    }
}

impl TrackCoverage {
    pub fn class(&self) -> CoverageClass {
        CoverageClass::of(self.covered, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtMl {
    pub mt: usize,
    pub ml: usize,
    pub n_tracks: usize,
    pub mt_pct: f64,
    pub ml_pct: f64,
    pub coverage: Vec<TrackCoverage>,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

impl MtMl {
    pub fn from_coverage(coverage: Vec<TrackCoverage>) -> Self {
        let mt = coverage.iter().filter(|c| c.class() == CoverageClass::MostlyTracked).count();
        let ml = coverage.iter().filter(|c| c.class() == CoverageClass::MostlyLost).count();
        let n = coverage.len();
        Self {
            mt,
            ml,
            n_tracks: n,
            mt_pct: percent(mt, n),
            ml_pct: percent(ml, n),
            coverage,
        }
    }
}

/// Mostly tracked / mostly lost counts. A GT observation counts as covered
/// when the gated per-keyframe assignment pairs it with any prediction,
/// whatever that prediction's identity.
pub fn mt_ml(gt_tracklets: &[Tracklet], pred: &VideoRecord, iou_threshold: f64) -> MtMl {
    // Rebuild per-keyframe GT frames from the tracklets.
    let mut frames: BTreeMap<u32, Vec<&crate::model::ActorObservation>> = BTreeMap::new();
    for t in gt_tracklets {
        for o in &t.observations {
            frames.entry(o.keyframe).or_default().push(o);
        }
    }
    let mut covered: BTreeMap<ActorId, usize> = BTreeMap::new();
    for (kf, gobs) in &mut frames {
        gobs.sort_by_key(|o| o.actor_id);
        let gowned: Vec<_> = gobs.iter().map(|o| (*o).clone()).collect();
        for (g, _) in match_frame(&gowned, pred.frame(*kf), iou_threshold) {
            *covered.entry(gowned[g].actor_id).or_default() += 1;
        }
    }
    let coverage = gt_tracklets
        .iter()
        .map(|t| {
            let c = covered.get(&t.actor_id).copied().unwrap_or(0);
            TrackCoverage {
                actor_id: t.actor_id,
                covered: c,
                total: t.len(),
                ratio: if t.is_empty() { 0.0 } else { c as f64 / t.len() as f64 },
            }
        })
        .collect();
    MtMl::from_coverage(coverage)
}

/// Convenience wrapper building tracklets from a GT record first.
pub fn mt_ml_for_record(gt: &VideoRecord, pred: &VideoRecord, iou_threshold: f64) -> Result<MtMl, ModelError> {
    Ok(mt_ml(&build_tracklets(gt)?, pred, iou_threshold))
}

/// Counts identity switches over keyframes in order.
///
/// With `persistence`, a GT actor first keeps its previous predicted
/// identity whenever that prediction is present and still passes the gate;
/// the remaining actors and predictions then go through the gated
/// assignment. A switch is recorded whenever a GT actor's matched identity
/// differs from the one at its previous matched keyframe.
pub fn id_switches(gt: &VideoRecord, pred: &VideoRecord, iou_threshold: f64, persistence: bool) -> usize {
    let mut last: BTreeMap<ActorId, ActorId> = BTreeMap::new();
    let mut switches = 0;
    for (kf, gframe) in gt.frames() {
        let pframe = pred.frame(kf);
        let mut gt_used = vec![false; gframe.len()];
        let mut pred_used = vec![false; pframe.len()];
        let mut matched: Vec<(usize, usize)> = Vec::new();
        if persistence {
            for (g, go) in gframe.iter().enumerate() {
                let Some(&prev) = last.get(&go.actor_id) else {
                    continue;
                };
                if let Some(p) = pframe.iter().position(|po| po.actor_id == prev) {
                    if !pred_used[p] && iou(&go.bbox, &pframe[p].bbox) >= iou_threshold {
                        gt_used[g] = true;
                        pred_used[p] = true;
                        matched.push((g, p));
                    }
                }
            }
        }
        let grest: Vec<usize> = (0..gframe.len()).filter(|&g| !gt_used[g]).collect();
        let prest: Vec<usize> = (0..pframe.len()).filter(|&p| !pred_used[p]).collect();
        let gsub: Vec<_> = grest.iter().map(|&g| gframe[g].clone()).collect();
        let psub: Vec<_> = prest.iter().map(|&p| pframe[p].clone()).collect();
        for (g, p) in match_frame(&gsub, &psub, iou_threshold) {
            matched.push((grest[g], prest[p]));
        }
        for (g, p) in matched {
            let gid = gframe[g].actor_id;
            let pid = pframe[p].actor_id;
            if let Some(prev) = last.insert(gid, pid) {
                if prev != pid {
                    switches += 1;
                }
            }
        }
    }
    switches
}

/// Distinct GT actors in a record.
pub fn gt_track_count(gt: &VideoRecord) -> usize {
    gt.observations().map(|o| o.actor_id).collect::<BTreeSet<_>>().len()
}
