//! Shared domain types: boxes, label sets, observations, tracklets and
//! per-video records, plus record validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Index into the annotated-keyframe sequence of a video.
pub type Keyframe = u32;

/// Actor identity, unique per actor within one video.
pub type ActorId = u32;

/// Annotated keyframe stride of the source dataset family, in video frames.
pub const DEFAULT_KEYFRAME_STRIDE: u32 = 25;

/// Number of action categories in the source dataset family.
pub const DEFAULT_N_LABELS: u16 = 80;

/// Axis-aligned rectangle in normalized frame coordinates.
///
/// Construction through [`BoundingBox::new`] enforces the invariants. The
/// fields stay public so programmatically built records can carry invalid
/// boxes, which [`validate_record`] then reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, ModelError> {
        let b = Self { x1, y1, x2, y2 };
        b.check()?;
        Ok(b)
    }

    /// Builds a box without checking invariants.
    pub const fn new_unchecked(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(ModelError::CoordinateOutOfRange(*self));
        }
        if !(self.x1 < self.x2 && self.y1 < self.y2) {
            return Err(ModelError::DegenerateBox(*self));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }
}

/// Set of action-category ids, each in `1..=n_labels`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionLabelSet(BTreeSet<u16>);

impl ActionLabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: u16) -> bool {
        self.0.insert(label)
    }

    pub fn remove(&mut self, label: u16) -> bool {
        self.0.remove(&label)
    }

    pub fn contains(&self, label: u16) -> bool {
        self.0.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        self.0.iter().copied()
    }

    /// First label outside `1..=n_labels`, if any.
    pub fn out_of_range(&self, n_labels: u16) -> Option<u16> {
        self.iter().find(|&l| l == 0 || l > n_labels)
    }

    /// Boolean indicator vector of length `n_labels`; position `l - 1` holds label `l`.
    pub fn to_indicator(&self, n_labels: u16) -> Vec<bool> {
        let mut bits = vec![false; n_labels as usize];
        for l in self.iter() {
            if l >= 1 && l <= n_labels {
                bits[(l - 1) as usize] = true;
            }
        }
        bits
    }
}

impl FromIterator<u16> for ActionLabelSet {
    fn from_iter<I: IntoIterator<Item = u16>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Extend<u16> for ActionLabelSet {
    fn extend<I: IntoIterator<Item = u16>>(&mut self, iter: I) {
        self.0.extend(iter);
    }
}

impl<const N: usize> From<[u16; N]> for ActionLabelSet {
    fn from(labels: [u16; N]) -> Self {
        labels.into_iter().collect()
    }
}

/// Whether a record holds ground truth or predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gt,
    Pred,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Gt => "gt",
            Role::Pred => "pred",
        })
    }
}

/// One actor at one keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorObservation {
    pub video_id: String,
    pub keyframe: Keyframe,
    pub bbox: BoundingBox,
    pub actor_id: ActorId,
    pub actions: ActionLabelSet,
    /// Detection confidence; fixed at 1.0 for ground truth.
    pub score: f64,
    pub appearance: Option<Vec<f64>>,
}

impl ActorObservation {
    /// Ground-truth observation (score 1.0, no appearance).
    pub fn gt(
        video_id: impl Into<String>,
        keyframe: Keyframe,
        bbox: BoundingBox,
        actor_id: ActorId,
        actions: ActionLabelSet,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            keyframe,
            bbox,
            actor_id,
            actions,
            score: 1.0,
            appearance: None,
        }
    }

    pub fn pred(
        video_id: impl Into<String>,
        keyframe: Keyframe,
        bbox: BoundingBox,
        actor_id: ActorId,
        actions: ActionLabelSet,
        score: f64,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            keyframe,
            bbox,
            actor_id,
            actions,
            score,
            appearance: None,
        }
    }
}

/// Keyframe-ordered observations of one actor within one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub actor_id: ActorId,
    pub observations: Vec<ActorObservation>,
}

impl Tracklet {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn keyframes(&self) -> impl Iterator<Item = Keyframe> + '_ {
        self.observations.iter().map(|o| o.keyframe)
    }

    pub fn first_keyframe(&self) -> Option<Keyframe> {
        self.observations.first().map(|o| o.keyframe)
    }

    pub fn last_keyframe(&self) -> Option<Keyframe> {
        self.observations.last().map(|o| o.keyframe)
    }
}

/// All observations of one role for one video, grouped by keyframe.
///
/// Within a keyframe, observations are kept sorted by actor id so every
/// consumer sees one canonical order regardless of input row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub role: Role,
    pub keyframe_stride: u32,
    pub n_labels: u16,
    frames: BTreeMap<Keyframe, Vec<ActorObservation>>,
}

impl VideoRecord {
    pub fn new(video_id: impl Into<String>, role: Role) -> Self {
        Self {
            video_id: video_id.into(),
            role,
            keyframe_stride: DEFAULT_KEYFRAME_STRIDE,
            n_labels: DEFAULT_N_LABELS,
            frames: BTreeMap::new(),
        }
    }

    pub fn with_n_labels(mut self, n_labels: u16) -> Self {
        self.n_labels = n_labels;
        self
    }

    pub fn with_stride(mut self, stride: u32) -> Self {
        self.keyframe_stride = stride;
        self
    }

    /// Adds an observation without validating it.
    pub fn push(&mut self, obs: ActorObservation) {
        let frame = self.frames.entry(obs.keyframe).or_default();
        let at = frame.partition_point(|o| o.actor_id <= obs.actor_id);
        frame.insert(at, obs);
    }

    pub fn extend<I: IntoIterator<Item = ActorObservation>>(&mut self, iter: I) {
        for obs in iter {
            self.push(obs);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.frames.values().all(Vec::is_empty)
    }

    /// Total number of observations.
    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn keyframes(&self) -> impl Iterator<Item = Keyframe> + '_ {
        self.frames.keys().copied()
    }

    pub fn frame(&self, keyframe: Keyframe) -> &[ActorObservation] {
        self.frames.get(&keyframe).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn frames(&self) -> impl Iterator<Item = (Keyframe, &[ActorObservation])> {
        self.frames.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub(crate) fn frames_mut(&mut self) -> impl Iterator<Item = &mut ActorObservation> {
        self.frames.values_mut().flat_map(|v| v.iter_mut())
    }

    /// Observations in canonical order: keyframe, then actor id.
    pub fn observations(&self) -> impl Iterator<Item = &ActorObservation> {
        self.frames.values().flatten()
    }

    pub fn actor_ids(&self) -> BTreeSet<ActorId> {
        self.observations().map(|o| o.actor_id).collect()
    }

    /// Re-sorts each keyframe after in-place edits of actor ids.
    pub(crate) fn normalize(&mut self) {
        self.frames.retain(|_, v| !v.is_empty());
        for frame in self.frames.values_mut() {
            frame.sort_by_key(|o| o.actor_id);
        }
    }

    pub(crate) fn retain(&mut self, mut keep: impl FnMut(&ActorObservation) -> bool) {
        for frame in self.frames.values_mut() {
            frame.retain(&mut keep);
        }
        self.frames.retain(|_, v| !v.is_empty());
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateIdentity,
    DegenerateBox,
    CoordinateOutOfRange,
    VideoIdMismatch { found: String },
    KeyframeMismatch { found: Keyframe },
    EmptyGroundTruthLabels,
    LabelOutOfRange { label: u16 },
    ScoreOutOfRange,
    GroundTruthScoreNotOne,
    AppearanceDimMismatch { expected: usize, found: usize },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateIdentity => write!(f, "duplicate identity at keyframe"),
            Self::DegenerateBox => write!(f, "degenerate box"),
            Self::CoordinateOutOfRange => write!(f, "coordinate outside [0,1]"),
            Self::VideoIdMismatch { found } => write!(f, "observation video id {found:?} differs from record"),
            Self::KeyframeMismatch { found } => write!(f, "observation keyframe {found} filed under another keyframe"),
            Self::EmptyGroundTruthLabels => write!(f, "ground-truth observation without action labels"),
            Self::LabelOutOfRange { label } => write!(f, "action label {label} out of range"),
            Self::ScoreOutOfRange => write!(f, "score outside [0,1]"),
            Self::GroundTruthScoreNotOne => write!(f, "ground-truth score must be 1.0"),
            Self::AppearanceDimMismatch { expected, found } => {
                write!(f, "appearance dimension {found}, expected {expected}")
            }
        }
    }
}

/// One broken invariant, located by keyframe and actor id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub keyframe: Keyframe,
    pub actor_id: ActorId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "keyframe {} actor {}: {}", self.keyframe, self.actor_id, self.kind)
    }
}

/// Lists every invariant violation in `record`, sorted. Empty iff valid.
pub fn validate_record(record: &VideoRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut appearance_dim: Option<usize> = None;
    for (kf, frame) in record.frames() {
        let mut seen = BTreeSet::new();
        for obs in frame {
            let mut report = |kind| {
                out.push(Violation {
                    keyframe: kf,
                    actor_id: obs.actor_id,
                    kind,
                })
            };
            if !seen.insert(obs.actor_id) {
                report(ViolationKind::DuplicateIdentity);
            }
            if obs.video_id != record.video_id {
                report(ViolationKind::VideoIdMismatch {
                    found: obs.video_id.clone(),
                });
            }
            if obs.keyframe != kf {
                report(ViolationKind::KeyframeMismatch { found: obs.keyframe });
            }
            match obs.bbox.check() {
                Err(ModelError::CoordinateOutOfRange(_)) => report(ViolationKind::CoordinateOutOfRange),
                Err(_) => report(ViolationKind::DegenerateBox),
                Ok(()) => {}
            }
            if let Some(label) = obs.actions.out_of_range(record.n_labels) {
                report(ViolationKind::LabelOutOfRange { label });
            }
            match record.role {
                Role::Gt => {
                    if obs.actions.is_empty() {
                        report(ViolationKind::EmptyGroundTruthLabels);
                    }
                    if obs.score != 1.0 {
                        report(ViolationKind::GroundTruthScoreNotOne);
                    }
                }
                Role::Pred => {
                    if !(0.0..=1.0).contains(&obs.score) {
                        report(ViolationKind::ScoreOutOfRange);
                    }
                }
            }
            if let Some(app) = &obs.appearance {
                match appearance_dim {
                    None => appearance_dim = Some(app.len()),
                    Some(d) if d != app.len() => report(ViolationKind::AppearanceDimMismatch {
                        expected: d,
                        found: app.len(),
                    }),
                    Some(_) => {}
                }
            }
        }
    }
    out.sort();
    out
}

/// Partitions a record into one tracklet per actor id, ordered by actor id.
pub fn build_tracklets(record: &VideoRecord) -> Result<Vec<Tracklet>, ModelError> {
    let mut by_actor: BTreeMap<ActorId, Vec<ActorObservation>> = BTreeMap::new();
    for (kf, frame) in record.frames() {
        for pair in frame.windows(2) {
            if pair[0].actor_id == pair[1].actor_id {
                return Err(ModelError::DuplicateIdentity {
                    keyframe: kf,
                    actor_id: pair[0].actor_id,
                });
            }
        }
        for obs in frame {
            by_actor.entry(obs.actor_id).or_default().push(obs.clone());
        }
    }
    Ok(by_actor
        .into_iter()
        .map(|(actor_id, observations)| Tracklet {
            actor_id,
            observations,
        })
        .collect())
}
