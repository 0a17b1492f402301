use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::PerturbError;
use crate::model::{ActionLabelSet, ActorId, ActorObservation, BoundingBox, Keyframe, Role, VideoRecord};

use super::{repair_box, MAX_BOX_SIDE, MIN_BOX_SIDE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Removes each observation independently with probability `p`.
    DropDetections { p: f64 },
    /// Adds N(0, sigma) to every box coordinate.
    JitterBoxes { sigma: f64 },
    /// Gives `actor_id` a fresh id from `keyframe` onward.
    SplitTrack { actor_id: ActorId, keyframe: Keyframe },
    /// Exchanges the ids of `a` and `b` from `keyframe` onward.
    SwapIds { a: ActorId, b: ActorId, keyframe: Keyframe },
    /// Flips `bits` distinct label bits across all observations.
    FlipLabels { bits: usize },
    /// Per observation, adds one random box with a fresh id with probability `rate`.
    InjectFp { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    #[serde(default)]
    pub seed: u64,
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), PerturbError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PerturbError::InvalidParameter(format!("{name} = {p} outside [0,1]")))
    }
}

fn require_actor(rec: &VideoRecord, id: ActorId) -> Result<(), PerturbError> {
    if rec.actor_ids().contains(&id) {
        Ok(())
    } else {
        Err(PerturbError::UnknownActor(id))
    }
}

fn next_free_id(rec: &VideoRecord) -> ActorId {
    rec.actor_ids().last().map_or(0, |m| m + 1)
}

/// Applies one corruption to `gt`, returning a prediction record. Fields the
/// corruption does not touch are copied unchanged.
pub fn perturb(gt: &VideoRecord, p: &Perturbation) -> Result<VideoRecord, PerturbError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut out = gt.clone();
    out.role = Role::Pred;

    match p.kind {
        PerturbationKind::DropDetections { p: prob } => {
            check_probability("p", prob)?;
            out.retain(|_| rng.random::<f64>() >= prob);
        }
        PerturbationKind::JitterBoxes { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(PerturbError::InvalidParameter(format!("sigma = {sigma} must be non-negative")));
            }
            if sigma > 0.0 {
                for o in out.frames_mut() {
                    let j: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * sigma);
                    let b = o.bbox;
                    o.bbox = repair_box(b.x1 + j[0], b.y1 + j[1], b.x2 + j[2], b.y2 + j[3]);
                }
            }
        }
        PerturbationKind::SplitTrack { actor_id, keyframe } => {
            require_actor(gt, actor_id)?;
            let fresh = next_free_id(gt);
            for o in out.frames_mut() {
                if o.actor_id == actor_id && o.keyframe >= keyframe {
                    o.actor_id = fresh;
                }
            }
            out.normalize();
        }
        PerturbationKind::SwapIds { a, b, keyframe } => {
            require_actor(gt, a)?;
            require_actor(gt, b)?;
            for o in out.frames_mut() {
                if o.keyframe >= keyframe {
                    if o.actor_id == a {
                        o.actor_id = b;
                    } else if o.actor_id == b {
                        o.actor_id = a;
                    }
                }
            }
            out.normalize();
        }
        PerturbationKind::FlipLabels { bits } => {
            let n_labels = gt.n_labels as usize;
            let total = gt.len() * n_labels;
            if bits > total {
                return Err(PerturbError::InvalidParameter(format!(
                    "cannot flip {bits} bits out of {total}"
                )));
            }
            let mut chosen: Vec<usize> = sample(&mut rng, total, bits).into_vec();
            chosen.sort_unstable();
            let mut it = chosen.into_iter().peekable();
            for (k, o) in out.frames_mut().enumerate() {
                while let Some(&bit) = it.peek() {
                    if bit / n_labels != k {
                        break;
                    }
                    let label = (bit % n_labels) as u16 + 1;
                    if !o.actions.remove(label) {
                        o.actions.insert(label);
                    }
                    it.next();
                }
            }
        }
        PerturbationKind::InjectFp { rate } => {
            check_probability("rate", rate)?;
            let mut next_id = next_free_id(gt);
            let mut extra = Vec::new();
            for o in gt.observations() {
                let u: f64 = rng.random();
                let w = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
                let h = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
                let x = rng.random_range(0.0..=1.0 - w);
                let y = rng.random_range(0.0..=1.0 - h);
                let score: f64 = rng.random();
                if u < rate {
                    extra.push(ActorObservation {
                        appearance: o.appearance.clone(),
                        ..ActorObservation::pred(
                            o.video_id.clone(),
                            o.keyframe,
                            BoundingBox::new_unchecked(x, y, x + w, y + h),
                            next_id,
                            ActionLabelSet::new(),
                            score,
                        )
                    });
                    next_id += 1;
                }
            }
            out.extend(extra);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_record;

    fn record(n_actors: u32, n_kf: u32) -> VideoRecord {
        let mut r = VideoRecord::new("v", Role::Gt);
        for kf in 0..n_kf {
            for a in 0..n_actors {
                let x = 0.2 * a as f64;
                let bbox = BoundingBox::new_unchecked(x, 0.1, x + 0.15, 0.4);
                r.push(ActorObservation::gt("v", kf, bbox, a, ActionLabelSet::from([1, 5])));
            }
        }
        r
    }

    fn apply(r: &VideoRecord, kind: PerturbationKind) -> Result<VideoRecord, PerturbError> {
        perturb(r, &Perturbation::new(kind, 7))
    }

    #[test]
    fn zero_drop_is_identity_up_to_role() {
        let r = record(3, 10);
        let out = apply(&r, PerturbationKind::DropDetections { p: 0.0 }).unwrap();
        assert_eq!(out.role, Role::Pred);
        assert_eq!(out.observations().collect::<Vec<_>>(), r.observations().collect::<Vec<_>>());
        assert!(apply(&r, PerturbationKind::DropDetections { p: 1.0 }).unwrap().is_empty());
    }

    #[test]
    fn split_uses_fresh_id_from_keyframe() {
        let r = record(2, 10);
        let out = apply(&r, PerturbationKind::SplitTrack { actor_id: 1, keyframe: 4 }).unwrap();
        for o in out.observations().filter(|o| o.bbox.x1 > 0.1) {
            assert_eq!(o.actor_id, if o.keyframe < 4 { 1 } else { 2 });
        }
        assert!(validate_record(&out).is_empty());
    }

    #[test]
    fn swap_needs_existing_ids() {
        let r = record(2, 4);
        let err = apply(&r, PerturbationKind::SwapIds { a: 0, b: 9, keyframe: 1 }).unwrap_err();
        assert!(matches!(err, PerturbError::UnknownActor(9)));
        let out = apply(&r, PerturbationKind::SwapIds { a: 0, b: 1, keyframe: 2 }).unwrap();
        let at3: Vec<_> = out.frame(3).iter().map(|o| (o.actor_id, o.bbox.x1)).collect();
        assert_eq!(at3, vec![(0, 0.2), (1, 0.0)]);
    }

    #[test]
    fn flip_changes_exactly_k_bits() {
        let r = record(2, 3);
        for k in [0, 1, 7, 480] {
            let out = apply(&r, PerturbationKind::FlipLabels { bits: k }).unwrap();
            let diff: u64 = r
                .observations()
                .zip(out.observations())
                .map(|(a, b)| crate::action::xor_count(&a.actions, &b.actions, 80))
                .sum();
            assert_eq!(diff, k as u64);
        }
        assert!(apply(&r, PerturbationKind::FlipLabels { bits: 481 }).is_err());
    }

    #[test]
    fn injected_fps_have_fresh_ids_and_validate() {
        let r = record(2, 20);
        let out = apply(&r, PerturbationKind::InjectFp { rate: 0.5 }).unwrap();
        assert!(out.len() > r.len());
        assert!(validate_record(&out).is_empty());
        assert!(apply(&r, PerturbationKind::InjectFp { rate: -0.1 }).is_err());
    }

    #[test]
    fn jitter_keeps_boxes_valid() {
        let r = record(3, 5);
        let out = apply(&r, PerturbationKind::JitterBoxes { sigma: 0.2 }).unwrap();
        assert!(out.observations().all(|o| o.bbox.is_valid()));
        assert_ne!(out, r);
    }
}
