//! Evaluation engine and data-association baselines for actor-identified
//! spatiotemporal action detection.
//!
//! Predictions are scored against ground truth on three axes that share one
//! gated bipartite matching substrate ([`matching`]):
//!
//! * spatial detection, as average precision at an IoU gate ([`detection`]);
//! * actor identification: IDF1, mostly tracked / mostly lost, and identity
//!   switches ([`identity`]);
//! * multi-label action classification, as Hamming loss over matched pairs
//!   ([`action`]).
//!
//! [`association`] provides interchangeable online and offline trackers
//! behind a name-keyed registry, and [`synth`] generates seeded scenarios for
//! comparing them.

pub mod action;
pub mod association;
pub mod bench;
pub mod detection;
pub mod error;
pub mod eval;
pub mod identity;
pub mod io;
pub mod matching;
pub mod model;
pub mod synth;

/// Version string embedded in reports and manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{AssociationError, BenchError, FormatError, ModelError, PerturbError, RowError, SynthError};
pub use model::{
    build_tracklets, validate_record, ActionLabelSet, ActorId, ActorObservation, BoundingBox, Keyframe, Role,
    Tracklet, VideoRecord, Violation, ViolationKind,
};
