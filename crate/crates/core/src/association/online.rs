use crate::error::AssociationError;
use crate::matching::{iou, linear_sum_assignment, CostMatrix};
use crate::model::{ActorId, BoundingBox, Keyframe, VideoRecord};

use super::{cosine_distance, AssociationConfig, Associator, DetectionStream};

/// Frame-by-frame tracker that only sees the past.
///
/// Match cost between a live track and a detection is
/// `lambda * (1 - IoU(last box, box)) + (1 - lambda) * cosine distance(track
/// mean embedding, embedding)`. Each keyframe is solved optimally; pairs
/// costing more than `tau` are rejected and leftover detections open new
/// tracks.
#[derive(Debug, Clone)]
pub struct OnlineTracker {
    cfg: AssociationConfig,
}

impl OnlineTracker {
    pub fn new(cfg: AssociationConfig) -> Result<Self, AssociationError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

struct Track {
    id: ActorId,
    last_box: BoundingBox,
    last_seen: Keyframe,
    appearance_sum: Vec<f64>,
    hits: usize,
}

impl Track {
    fn mean_appearance(&self) -> Vec<f64> {
        self.appearance_sum.iter().map(|v| v / self.hits as f64).collect()
    }
}

impl Associator for OnlineTracker {
    fn name(&self) -> &'static str {
        "online"
    }

    fn config(&self) -> &AssociationConfig {
        &self.cfg
    }

    fn assign_ids(&self, stream: &DetectionStream) -> Result<Vec<ActorId>, AssociationError> {
        stream.check_dims()?;
        let cfg = &self.cfg;
        let dets = stream.detections();
        let mut ids = vec![0; dets.len()];
        let mut tracks: Vec<Track> = Vec::new();
        let mut next_id: ActorId = 0;

        for (kf, range) in stream.keyframe_groups() {
            tracks.retain(|t| kf - t.last_seen <= cfg.max_gap);
            let group = &dets[range.clone()];
            let means: Vec<Vec<f64>> = tracks.iter().map(Track::mean_appearance).collect();
            let cost = CostMatrix::from_fn(tracks.len(), group.len(), |t, d| {
                cfg.lambda * (1.0 - iou(&tracks[t].last_box, &group[d].bbox))
                    + (1.0 - cfg.lambda) * cosine_distance(&means[t], &group[d].appearance)
            });
            let mut taken = vec![false; group.len()];
            for (t, d) in linear_sum_assignment(&cost) {
                if cost.get(t, d) > cfg.tau {
                    continue;
                }
                taken[d] = true;
                let det = &group[d];
                let track = &mut tracks[t];
                track.last_box = det.bbox;
                track.last_seen = kf;
                track.hits += 1;
                for (s, v) in track.appearance_sum.iter_mut().zip(&det.appearance) {
                    *s += v;
                }
                ids[range.start + d] = track.id;
            }
            for (d, det) in group.iter().enumerate() {
                if taken[d] {
                    continue;
                }
                ids[range.start + d] = next_id;
                tracks.push(Track {
                    id: next_id,
                    last_box: det.bbox,
                    last_seen: kf,
                    appearance_sum: det.appearance.clone(),
                    hits: 1,
                });
                next_id += 1;
            }
        }
        Ok(ids)
    }
}

/// Runs the online tracker over one stream.
pub fn track_online(stream: &DetectionStream, cfg: &AssociationConfig) -> Result<VideoRecord, AssociationError> {
    OnlineTracker::new(*cfg)?.track(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::Detection;

    fn det(kf: Keyframe, x: f64, y: f64, app: &[f64]) -> Detection {
        Detection {
            keyframe: kf,
            bbox: BoundingBox::new_unchecked(x, y, x + 0.1, y + 0.1),
            score: 0.9,
            appearance: app.to_vec(),
        }
    }

    fn cfg(lambda: f64) -> AssociationConfig {
        AssociationConfig { lambda, tau: 0.5, max_gap: 5 }
    }

    #[test]
    fn smooth_single_actor_keeps_one_id() {
        let dets = (0..20).map(|k| det(k, 0.1 + 0.005 * k as f64, 0.3, &[1.0, 0.0])).collect();
        let s = DetectionStream::new("v", 2, dets).unwrap();
        let ids = OnlineTracker::new(cfg(0.7)).unwrap().assign_ids(&s).unwrap();
        assert!(ids.iter().all(|&i| i == 0));
    }

    #[test]
    fn motion_only_tracker_breaks_at_a_cut() {
        let mut dets: Vec<_> = (0..5).map(|k| det(k, 0.1, 0.1, &[1.0, 0.0])).collect();
        dets.extend((5..10).map(|k| det(k, 0.8, 0.8, &[1.0, 0.0])));
        let s = DetectionStream::new("v", 2, dets).unwrap();
        let ids = OnlineTracker::new(cfg(1.0)).unwrap().assign_ids(&s).unwrap();
        assert_eq!(&ids[..5], &[0; 5]);
        assert_eq!(&ids[5..], &[1; 5]);
    }

    #[test]
    fn appearance_only_tracker_survives_crossing() {
        // Two actors swap horizontal positions over the sequence.
        let mut dets = Vec::new();
        for k in 0..11u32 {
            let t = k as f64 / 10.0;
            dets.push(det(k, 0.1 + 0.6 * t, 0.4, &[1.0, 0.0]));
            dets.push(det(k, 0.7 - 0.6 * t, 0.4, &[0.0, 1.0]));
        }
        let s = DetectionStream::new("v", 2, dets).unwrap();
        let ids = OnlineTracker::new(cfg(0.0)).unwrap().assign_ids(&s).unwrap();
        for (d, id) in s.detections().iter().zip(&ids) {
            let expected = if d.appearance[0] == 1.0 { 0 } else { 1 };
            assert_eq!(*id, expected);
        }
    }

    #[test]
    fn stale_tracks_retire() {
        let dets = vec![det(0, 0.1, 0.1, &[1.0]), det(10, 0.1, 0.1, &[1.0])];
        let s = DetectionStream::new("v", 1, dets).unwrap();
        let ids = OnlineTracker::new(cfg(0.7)).unwrap().assign_ids(&s).unwrap();
        assert_eq!(ids, vec![0, 1]);
    }
}
