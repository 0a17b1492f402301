//! Data association: turning per-keyframe detections into actor tubes.
//!
//! Each strategy implements [`Associator`] and is registered by name in an
//! [`AssociatorRegistry`]; callers pick one at runtime (`"online"` or
//! `"offline"` for the built-ins).

mod offline;
mod online;
mod registry;

use serde::{Deserialize, Serialize};

pub use offline::{track_offline, OfflineTracker};
pub use online::{track_online, OnlineTracker};
pub use registry::{builtin_registry, AssociatorRegistry, ConfigOverrides, StrategyEntry};

use crate::error::AssociationError;
use crate::model::{ActionLabelSet, ActorId, ActorObservation, BoundingBox, Keyframe, Role, VideoRecord};

/// One unidentified detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub keyframe: Keyframe,
    pub bbox: BoundingBox,
    pub score: f64,
    pub appearance: Vec<f64>,
}

/// Keyframe-ordered detections of one video with a fixed embedding width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStream {
    pub video_id: String,
    pub dim: usize,
    detections: Vec<Detection>,
}

impl DetectionStream {
    /// Checks the embedding width and stably sorts by keyframe.
    pub fn new(
        video_id: impl Into<String>,
        dim: usize,
        mut detections: Vec<Detection>,
    ) -> Result<Self, AssociationError> {
        if let Some(d) = detections.iter().find(|d| d.appearance.len() != dim) {
            return Err(AssociationError::DimensionMismatch {
                keyframe: d.keyframe,
                expected: dim,
                found: d.appearance.len(),
            });
        }
        detections.sort_by_key(|d| d.keyframe);
        Ok(Self {
            video_id: video_id.into(),
            dim,
            detections,
        })
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Index ranges of detections sharing a keyframe, in keyframe order.
    pub(crate) fn keyframe_groups(&self) -> Vec<(Keyframe, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.detections.len() {
            let kf = self.detections[start].keyframe;
            let mut end = start;
            while end < self.detections.len() && self.detections[end].keyframe == kf {
                end += 1;
            }
            out.push((kf, start..end));
            start = end;
        }
        out
    }

    pub(crate) fn check_dims(&self) -> Result<(), AssociationError> {
        match self.detections.iter().find(|d| d.appearance.len() != self.dim) {
            Some(d) => Err(AssociationError::DimensionMismatch {
                keyframe: d.keyframe,
                expected: self.dim,
                found: d.appearance.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Tunables shared by the association strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Weight of the motion (IoU) term against the appearance term.
    pub lambda: f64,
    /// Online: maximum accepted match cost. Offline: minimum merge affinity.
    pub tau: f64,
    /// Online: keyframes a track may go unmatched before it retires.
    /// Offline: largest keyframe gap two detections may be linked across.
    pub max_gap: u32,
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<(), AssociationError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(AssociationError::InvalidConfig(format!("lambda {} outside [0,1]", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(AssociationError::InvalidConfig(format!("tau {} outside (0,1]", self.tau)));
        }
        if self.max_gap < 1 {
            return Err(AssociationError::InvalidConfig("max_gap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A data-association strategy.
pub trait Associator: Send + Sync {
    fn name(&self) -> &'static str;

    fn config(&self) -> &AssociationConfig;

    /// One actor id per detection, aligned with `stream.detections()`.
    fn assign_ids(&self, stream: &DetectionStream) -> Result<Vec<ActorId>, AssociationError>;

    /// Prediction record with assigned ids and empty action sets.
    fn track(&self, stream: &DetectionStream) -> Result<VideoRecord, AssociationError> {
        let ids = self.assign_ids(stream)?;
        Ok(to_record(stream, &ids, None))
    }
}

/// Builds a prediction record from per-detection ids. `labels`, when given,
/// is aligned with the detections and attached as action sets.
pub fn to_record(stream: &DetectionStream, ids: &[ActorId], labels: Option<&[ActionLabelSet]>) -> VideoRecord {
    let mut rec = VideoRecord::new(stream.video_id.clone(), Role::Pred);
    for (k, (d, &id)) in stream.detections.iter().zip(ids).enumerate() {
        let actions = labels.map(|l| l[k].clone()).unwrap_or_default();
        rec.push(ActorObservation::pred(
            stream.video_id.clone(),
            d.keyframe,
            d.bbox,
            id,
            actions,
            d.score,
        ));
    }
    rec
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cosine_similarity(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_rejects_ragged_embeddings() {
        let b = BoundingBox::new_unchecked(0.1, 0.1, 0.2, 0.2);
        let dets = vec![
            Detection { keyframe: 0, bbox: b, score: 1.0, appearance: vec![1.0, 0.0] },
            Detection { keyframe: 1, bbox: b, score: 1.0, appearance: vec![1.0] },
        ];
        assert!(matches!(
            DetectionStream::new("v", 2, dets),
            Err(AssociationError::DimensionMismatch { keyframe: 1, expected: 2, found: 1 })
        ));
    }

    #[test]
    fn stream_sorts_stably() {
        let b = BoundingBox::new_unchecked(0.1, 0.1, 0.2, 0.2);
        let d = |kf, s| Detection { keyframe: kf, bbox: b, score: s, appearance: vec![] };
        let s = DetectionStream::new("v", 0, vec![d(2, 0.1), d(0, 0.2), d(2, 0.3), d(0, 0.4)]).unwrap();
        let scores: Vec<f64> = s.detections().iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.2, 0.4, 0.1, 0.3]);
        assert_eq!(s.keyframe_groups(), vec![(0, 0..2), (2, 2..4)]);
    }

    #[test]
    fn cosine_edge_cases() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine_distance(&[2.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn config_validation() {
        let ok = AssociationConfig { lambda: 0.5, tau: 0.5, max_gap: 1 };
        assert!(ok.validate().is_ok());
        assert!(AssociationConfig { lambda: 1.5, ..ok }.validate().is_err());
        assert!(AssociationConfig { tau: 0.0, ..ok }.validate().is_err());
        assert!(AssociationConfig { max_gap: 0, ..ok }.validate().is_err());
    }
}
