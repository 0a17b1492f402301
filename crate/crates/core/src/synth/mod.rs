//! Seeded synthetic scenarios: ground-truth actor tubes, a noisy detection
//! stream with appearance embeddings, and controlled degradations of ground
//! truth for metric checks.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`; normals use `rand_distr::StandardNormal`. Every
//! keyframe consumes a fixed number of draws regardless of the noise
//! settings, so changing e.g. `p_miss` alone only changes which detections
//! are dropped.

mod perturb;

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use perturb::{perturb, Perturbation, PerturbationKind};

use crate::association::{cosine_similarity, Detection, DetectionStream};
use crate::error::SynthError;
use crate::model::{ActionLabelSet, ActorObservation, BoundingBox, Keyframe, Role, VideoRecord};

/// Identifier of the random generator, recorded in manifests.
pub const GENERATOR_ID: &str = "rand_chacha::ChaCha8Rng::seed_from_u64 + rand_distr::StandardNormal";

pub const MIN_BOX_SIDE: f64 = 0.08;
pub const MAX_BOX_SIDE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub video_id: String,
    pub n_actors: u32,
    pub n_keyframes: u32,
    /// Shot cuts re-randomizing every actor's position and velocity.
    pub n_cuts: u32,
    /// Largest per-keyframe displacement along each axis.
    pub max_speed: f64,
    pub appearance_dim: usize,
    /// Largest cosine allowed between two actors' base embeddings.
    pub max_appearance_cos: f64,
    /// Approximate norm of the per-detection embedding noise.
    pub sigma_app: f64,
    pub sigma_box: f64,
    pub p_miss: f64,
    /// Per actor and keyframe, chance of one spurious detection.
    pub p_fp: f64,
    /// Per actor and keyframe, chance the action set is redrawn.
    pub p_act: f64,
    /// Per label bit, chance the detection's classifier output flips it.
    pub p_label_flip: f64,
    pub n_labels: u16,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            video_id: "synth".into(),
            n_actors: 5,
            n_keyframes: 120,
            n_cuts: 20,
            max_speed: 0.01,
            appearance_dim: 32,
            max_appearance_cos: 0.3,
            sigma_app: 0.1,
            sigma_box: 0.01,
            p_miss: 0.05,
            p_fp: 0.05,
            p_act: 0.1,
            p_label_flip: 0.01,
            n_labels: crate::model::DEFAULT_N_LABELS,
            seed: 0,
        }
    }
}

/// Named scenario presets. `default` and `camera-cut` are the same.
pub fn preset(name: &str) -> Result<ScenarioSpec, SynthError> {
    match name {
        "default" | "camera-cut" => Ok(ScenarioSpec::default()),
        "static" => Ok(ScenarioSpec {
            n_cuts: 0,
            ..ScenarioSpec::default()
        }),
        _ => Err(SynthError::UnknownScenario(name.to_string())),
    }
}

pub const PRESET_NAMES: [&str; 3] = ["default", "camera-cut", "static"];

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.check().map_err(SynthError::InvalidSpec)
    }

    fn check(&self) -> Result<(), String> {
        let probs = [
            ("p_miss", self.p_miss),
            ("p_fp", self.p_fp),
            ("p_act", self.p_act),
            ("p_label_flip", self.p_label_flip),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} outside [0,1]"));
            }
        }
        if self.n_actors < 1 {
            return Err("n_actors must be at least 1".into());
        }
        if self.n_keyframes < 2 {
            return Err("n_keyframes must be at least 2".into());
        }
        if self.n_cuts >= self.n_keyframes {
            return Err("n_cuts must be below n_keyframes".into());
        }
        if self.n_labels < 1 {
            return Err("n_labels must be at least 1".into());
        }
        if !(self.sigma_box >= 0.0 && self.sigma_app >= 0.0 && self.max_speed >= 0.0) {
            return Err("noise scales and speed must be non-negative".into());
        }
        if !(-1.0..=1.0).contains(&self.max_appearance_cos) {
            return Err("max_appearance_cos outside [-1,1]".into());
        }
        Ok(())
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub gt: VideoRecord,
    pub stream: DetectionStream,
    /// Simulated classifier output per detection, aligned with the stream.
    pub detection_labels: Vec<ActionLabelSet>,
    pub cuts: Vec<Keyframe>,
}

/// Provenance written next to generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub generator: String,
    pub scenario: String,
    pub spec: ScenarioSpec,
    pub cuts: Vec<Keyframe>,
}

impl Manifest {
    pub fn new(scenario_name: &str, scenario: &Scenario) -> Self {
        Self {
            tool_version: crate::VERSION.to_string(),
            generator: GENERATOR_ID.to_string(),
            scenario: scenario_name.to_string(),
            spec: scenario.spec.clone(),
            cuts: scenario.cuts.clone(),
        }
    }
}

struct ActorState {
    w: f64,
    h: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    base_appearance: Vec<f64>,
    labels: ActionLabelSet,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
        if dim == 0 {
            return v;
        }
    }
}

fn random_labels(rng: &mut ChaCha8Rng, n_labels: u16) -> ActionLabelSet {
    let k = rng.random_range(1..=3usize).min(n_labels as usize);
    sample(rng, n_labels as usize, k).into_iter().map(|i| i as u16 + 1).collect()
}

fn place(rng: &mut ChaCha8Rng, w: f64, h: f64, speed: f64) -> (f64, f64, f64, f64) {
    let x = rng.random_range(0.0..=1.0 - w);
    let y = rng.random_range(0.0..=1.0 - h);
    let vx = rng.random_range(-1.0..=1.0) * speed;
    let vy = rng.random_range(-1.0..=1.0) * speed;
    (x, y, vx, vy)
}

fn reflect(pos: &mut f64, vel: &mut f64, size: f64) {
    *pos += *vel;
    if *pos < 0.0 {
        *pos = -*pos;
        *vel = -*vel;
    }
    if *pos + size > 1.0 {
        *pos = 2.0 * (1.0 - size) - *pos;
        *vel = -*vel;
    }
    *pos = pos.clamp(0.0, 1.0 - size);
}

/// Clamps a jittered box into the frame and keeps it non-degenerate.
pub(crate) fn repair_box(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
    const MIN_SIDE: f64 = 1e-3;
    let fix = |a: f64, b: f64| {
        let (mut a, mut b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b - a < MIN_SIDE {
            let mid = (0.5 * (a + b)).clamp(MIN_SIDE / 2.0, 1.0 - MIN_SIDE / 2.0);
            a = mid - MIN_SIDE / 2.0;
            b = mid + MIN_SIDE / 2.0;
        }
        (a, b)
    };
    let (x1, x2) = fix(x1, x2);
    let (y1, y2) = fix(y1, y2);
    BoundingBox::new_unchecked(x1, y1, x2, y2)
}

/// Generates ground truth and a detection stream from `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.appearance_dim;

    let mut bases: Vec<Vec<f64>> = Vec::new();
    for _ in 0..spec.n_actors {
        let mut attempts = 0;
        let v = loop {
            let v = unit_vector(&mut rng, dim);
            attempts += 1;
            if bases.iter().all(|b| cosine_similarity(b, &v) <= spec.max_appearance_cos) || dim == 0 {
                break v;
            }
            if attempts > 100_000 {
                return Err(SynthError::InvalidSpec(
                    "could not separate actor appearances; lower n_actors or raise max_appearance_cos".into(),
                ));
            }
        };
        bases.push(v);
    }

    let mut actors: Vec<ActorState> = bases
        .into_iter()
        .map(|base_appearance| {
            let w = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
            let h = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
            let (x, y, vx, vy) = place(&mut rng, w, h, spec.max_speed);
            let labels = random_labels(&mut rng, spec.n_labels);
            ActorState {
                w,
                h,
                x,
                y,
                vx,
                vy,
                base_appearance,
                labels,
            }
        })
        .collect();

    let cuts: BTreeSet<Keyframe> = sample(&mut rng, (spec.n_keyframes - 1) as usize, spec.n_cuts as usize)
        .into_iter()
        .map(|i| i as Keyframe + 1)
        .collect();

    let mut gt = VideoRecord::new(spec.video_id.clone(), Role::Gt).with_n_labels(spec.n_labels);
    let mut detections = Vec::new();
    let mut detection_labels = Vec::new();
    let noise_scale = if dim > 0 { spec.sigma_app / (dim as f64).sqrt() } else { 0.0 };

    for kf in 0..spec.n_keyframes {
        let cut = cuts.contains(&kf);
        let mut spurious = Vec::new();
        for (id, a) in actors.iter_mut().enumerate() {
            if cut {
                let (x, y, vx, vy) = place(&mut rng, a.w, a.h, spec.max_speed);
                (a.x, a.y, a.vx, a.vy) = (x, y, vx, vy);
            } else if kf > 0 {
                reflect(&mut a.x, &mut a.vx, a.w);
                reflect(&mut a.y, &mut a.vy, a.h);
            }
            let redraw: f64 = rng.random();
            let new_labels = random_labels(&mut rng, spec.n_labels);
            if kf > 0 && redraw < spec.p_act {
                a.labels = new_labels;
            }
            let bbox = BoundingBox::new_unchecked(a.x, a.y, a.x + a.w, a.y + a.h);
            gt.push(ActorObservation::gt(spec.video_id.clone(), kf, bbox, id as u32, a.labels.clone()));

            // Detection of this actor; all draws happen whether or not it is kept.
            let miss: f64 = rng.random();
            let jitter: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * spec.sigma_box);
            let score = rng.random_range(0.5..=1.0);
            let noise: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * noise_scale).collect();
            let flips: Vec<f64> = (0..spec.n_labels).map(|_| rng.random()).collect();
            if miss >= spec.p_miss {
                let det_box = if spec.sigma_box > 0.0 {
                    repair_box(bbox.x1 + jitter[0], bbox.y1 + jitter[1], bbox.x2 + jitter[2], bbox.y2 + jitter[3])
                } else {
                    bbox
                };
                let appearance = a.base_appearance.iter().zip(&noise).map(|(b, n)| b + n).collect();
                let mut labels = a.labels.clone();
                for (l, &u) in (1..=spec.n_labels).zip(&flips) {
                    if u < spec.p_label_flip && !labels.remove(l) {
                        labels.insert(l);
                    }
                }
                detections.push(Detection {
                    keyframe: kf,
                    bbox: det_box,
                    score,
                    appearance,
                });
                detection_labels.push(labels);
            }

            // Spurious detection near nothing in particular.
            let fp: f64 = rng.random();
            let fw = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
            let fh = rng.random_range(MIN_BOX_SIDE..=MAX_BOX_SIDE);
            let fx = rng.random_range(0.0..=1.0 - fw);
            let fy = rng.random_range(0.0..=1.0 - fh);
            let fscore = rng.random_range(0.0..=0.7);
            let fapp = unit_vector(&mut rng, dim);
            let flabels = random_labels(&mut rng, spec.n_labels);
            if fp < spec.p_fp {
                spurious.push((
                    Detection {
                        keyframe: kf,
                        bbox: BoundingBox::new_unchecked(fx, fy, fx + fw, fy + fh),
                        score: fscore,
                        appearance: fapp,
                    },
                    flabels,
                ));
            }
        }
        for (d, l) in spurious {
            detections.push(d);
            detection_labels.push(l);
        }
    }

    let stream = DetectionStream::new(spec.video_id.clone(), dim, detections).expect("generated embeddings share one width");
    Ok(Scenario {
        spec: spec.clone(),
        gt,
        stream,
        detection_labels,
        cuts: cuts.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_record;

    fn quiet(n_actors: u32) -> ScenarioSpec {
        ScenarioSpec {
            n_actors,
            n_keyframes: 30,
            n_cuts: 0,
            sigma_app: 0.0,
            sigma_box: 0.0,
            p_miss: 0.0,
            p_fp: 0.0,
            p_label_flip: 0.0,
            seed: 3,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn noiseless_single_actor_stream_equals_gt() {
        let s = generate(&quiet(1)).unwrap();
        let gt_boxes: Vec<_> = s.gt.observations().map(|o| o.bbox).collect();
        let det_boxes: Vec<_> = s.stream.detections().iter().map(|d| d.bbox).collect();
        assert_eq!(gt_boxes, det_boxes);
        assert_eq!(s.gt.len(), 30);
    }

    #[test]
    fn same_seed_same_output() {
        let spec = ScenarioSpec { seed: 11, ..ScenarioSpec::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = ScenarioSpec { seed: 12, ..ScenarioSpec::default() };
        assert_ne!(generate(&spec).unwrap().gt, generate(&other).unwrap().gt);
    }

    #[test]
    fn certain_miss_gives_empty_stream() {
        let spec = ScenarioSpec { p_miss: 1.0, p_fp: 0.0, ..ScenarioSpec::default() };
        let s = generate(&spec).unwrap();
        assert!(s.stream.is_empty());
        assert_eq!(s.gt.len(), 5 * 120);
    }

    #[test]
    fn generated_records_validate() {
        for seed in 0..5 {
            let s = generate(&ScenarioSpec { seed, ..ScenarioSpec::default() }).unwrap();
            assert!(validate_record(&s.gt).is_empty());
            assert_eq!(s.cuts.len(), 20);
            assert!(s.stream.detections().iter().all(|d| d.bbox.is_valid()));
            assert_eq!(s.stream.len(), s.detection_labels.len());
        }
    }

    #[test]
    fn base_appearances_are_separated() {
        let spec = ScenarioSpec { sigma_app: 0.0, p_miss: 0.0, p_fp: 0.0, ..ScenarioSpec::default() };
        let s = generate(&spec).unwrap();
        let firsts: Vec<_> = s.stream.detections()[..5].iter().map(|d| d.appearance.clone()).collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert!(cosine_similarity(&firsts[i], &firsts[j]) <= 0.3 + 1e-12);
            }
        }
    }

    #[test]
    fn presets() {
        assert_eq!(preset("static").unwrap().n_cuts, 0);
        assert_eq!(preset("camera-cut").unwrap().n_cuts, 20);
        assert!(preset("nope").is_err());
        assert!(ScenarioSpec { p_miss: 1.5, ..ScenarioSpec::default() }.validate().is_err());
    }

    #[test]
    fn repaired_boxes_are_valid() {
        assert!(repair_box(-0.1, 0.5, 0.3, 0.5).is_valid());
        assert!(repair_box(0.99, 0.2, 1.2, 0.1).is_valid());
    }
}
