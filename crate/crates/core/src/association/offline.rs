use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::AssociationError;
use crate::matching::iou;
use crate::model::{ActorId, Keyframe, VideoRecord};

use super::{cosine_similarity, AssociationConfig, Associator, DetectionStream};

/// Whole-sequence tracker: greedy agglomerative clustering of detections.
///
/// Affinity between clusters A and B is
/// `(1 - l) * cos(mean_A, mean_B) + l * IoU(a, b)` where `(a, b)` is the
/// closest-in-time detection pair across the clusters, at gap `g <= max_gap`,
/// and `l = lambda * decay(g)` falls linearly from `lambda` at gap 1 to 0 at
/// `max_gap`. The best pair merges while its affinity reaches `tau` and the
/// union still holds at most one detection per keyframe.
#[derive(Debug, Clone)]
pub struct OfflineTracker {
    cfg: AssociationConfig,
}

impl OfflineTracker {
    pub fn new(cfg: AssociationConfig) -> Result<Self, AssociationError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

struct Cluster {
    /// `(keyframe, detection index)`, sorted.
    members: Vec<(Keyframe, usize)>,
    appearance_sum: Vec<f64>,
    version: u32,
    alive: bool,
}

impl Cluster {
    fn keyframes(&self) -> impl Iterator<Item = Keyframe> + '_ {
        self.members.iter().map(|m| m.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    affinity: f64,
    a: usize,
    b: usize,
    version_a: u32,
    version_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap on affinity; ties go to the smaller (a, b).
    fn cmp(&self, other: &Self) -> Ordering {
        self.affinity
            .total_cmp(&other.affinity)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

fn decay(gap: u32, max_gap: u32) -> f64 {
    if max_gap <= 1 {
        1.0
    } else {
        (max_gap - gap) as f64 / (max_gap - 1) as f64
    }
}

struct Clustering<'a> {
    stream: &'a DetectionStream,
    cfg: AssociationConfig,
    clusters: Vec<Cluster>,
    owner: Vec<usize>,
    by_keyframe: BTreeMap<Keyframe, Vec<usize>>,
}

impl<'a> Clustering<'a> {
    fn new(stream: &'a DetectionStream, cfg: AssociationConfig) -> Self {
        let dets = stream.detections();
        let clusters = dets
            .iter()
            .enumerate()
            .map(|(k, d)| Cluster {
                members: vec![(d.keyframe, k)],
                appearance_sum: d.appearance.clone(),
                version: 0,
                alive: true,
            })
            .collect();
        let mut by_keyframe: BTreeMap<Keyframe, Vec<usize>> = BTreeMap::new();
        for (k, d) in dets.iter().enumerate() {
            by_keyframe.entry(d.keyframe).or_default().push(k);
        }
        Self {
            stream,
            cfg,
            clusters,
            owner: (0..dets.len()).collect(),
            by_keyframe,
        }
    }

    /// `None` when the clusters share a keyframe or are too far apart.
    fn affinity(&self, a: usize, b: usize) -> Option<f64> {
        let (ca, cb) = (&self.clusters[a], &self.clusters[b]);
        let kb: Vec<Keyframe> = cb.keyframes().collect();
        let mut best_gap = u32::MAX;
        let mut closest: Vec<(usize, usize)> = Vec::new();
        for &(kf, da) in &ca.members {
            let at = kb.partition_point(|&k| k < kf);
            if at < kb.len() && kb[at] == kf {
                return None;
            }
            for idx in [at.checked_sub(1), (at < kb.len()).then_some(at)].into_iter().flatten() {
                let gap = kb[idx].abs_diff(kf);
                // every member of B at that keyframe; one per keyframe once cannot-link holds
                let db = cb.members[idx].1;
                match gap.cmp(&best_gap) {
                    Ordering::Less => {
                        best_gap = gap;
                        closest.clear();
                        closest.push((da, db));
                    }
                    Ordering::Equal => closest.push((da, db)),
                    Ordering::Greater => {}
                }
            }
        }
        if best_gap == 0 || best_gap > self.cfg.max_gap {
            return None;
        }
        let dets = self.stream.detections();
        let motion = closest
            .iter()
            .map(|&(da, db)| iou(&dets[da].bbox, &dets[db].bbox))
            .fold(0.0, f64::max);
        let weight = self.cfg.lambda * decay(best_gap, self.cfg.max_gap);
        let appearance = cosine_similarity(&ca.appearance_sum, &cb.appearance_sum);
        Some((1.0 - weight) * appearance + weight * motion)
    }

    /// Live clusters owning a detection within `max_gap` keyframes of `c`.
    fn neighbours(&self, c: usize) -> BTreeSet<usize> {
        let g = self.cfg.max_gap;
        let mut out = BTreeSet::new();
        for kf in self.clusters[c].keyframes() {
            for (_, dets) in self.by_keyframe.range(kf.saturating_sub(g)..=kf.saturating_add(g)) {
                for &d in dets {
                    let o = self.owner[d];
                    if o != c {
                        out.insert(o);
                    }
                }
            }
        }
        out
    }

    fn candidate(&self, a: usize, b: usize) -> Option<Candidate> {
        let (a, b) = (a.min(b), a.max(b));
        let affinity = self.affinity(a, b)?;
        (affinity >= self.cfg.tau).then_some(Candidate {
            affinity,
            a,
            b,
            version_a: self.clusters[a].version,
            version_b: self.clusters[b].version,
        })
    }

    fn run(mut self) -> Vec<ActorId> {
        let mut heap = BinaryHeap::new();
        for c in 0..self.clusters.len() {
            for n in self.neighbours(c) {
                if n > c {
                    heap.extend(self.candidate(c, n));
                }
            }
        }
        while let Some(top) = heap.pop() {
            let (ca, cb) = (&self.clusters[top.a], &self.clusters[top.b]);
            if !ca.alive || !cb.alive || ca.version != top.version_a || cb.version != top.version_b {
                continue;
            }
            // Merge b into a.
            let absorbed = std::mem::take(&mut self.clusters[top.b].members);
            self.clusters[top.b].alive = false;
            for &(_, d) in &absorbed {
                self.owner[d] = top.a;
            }
            let sum_b = std::mem::take(&mut self.clusters[top.b].appearance_sum);
            let a = &mut self.clusters[top.a];
            a.members.extend(absorbed);
            a.members.sort_unstable();
            for (s, v) in a.appearance_sum.iter_mut().zip(&sum_b) {
                *s += v;
            }
            a.version += 1;
            for n in self.neighbours(top.a) {
                heap.extend(self.candidate(top.a, n));
            }
        }

        let mut live: Vec<&Cluster> = self.clusters.iter().filter(|c| c.alive).collect();
        live.sort_by_key(|c| c.members[0]);
        let mut ids = vec![0; self.owner.len()];
        for (id, c) in live.iter().enumerate() {
            for &(_, d) in &c.members {
                ids[d] = id as ActorId;
            }
        }
        ids
    }
}

impl Associator for OfflineTracker {
    fn name(&self) -> &'static str {
        "offline"
    }

    fn config(&self) -> &AssociationConfig {
        &self.cfg
    }

    fn assign_ids(&self, stream: &DetectionStream) -> Result<Vec<ActorId>, AssociationError> {
        stream.check_dims()?;
        Ok(Clustering::new(stream, self.cfg).run())
    }
}

/// Runs the offline tracker over one stream.
pub fn track_offline(stream: &DetectionStream, cfg: &AssociationConfig) -> Result<VideoRecord, AssociationError> {
    OfflineTracker::new(*cfg)?.track(stream)
}
