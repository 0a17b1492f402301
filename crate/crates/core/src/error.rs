use std::path::PathBuf;

use thiserror::Error;

use crate::model::{ActorId, BoundingBox, Keyframe, Violation};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("box {0:?} has a coordinate outside [0,1]")]
    CoordinateOutOfRange(BoundingBox),
    #[error("box {0:?} has non-positive area")]
    DegenerateBox(BoundingBox),
    #[error("duplicate actor {actor_id} at keyframe {keyframe}")]
    DuplicateIdentity { keyframe: Keyframe, actor_id: ActorId },
}

#[derive(Debug, Error)]
pub enum AssociationError {
    #[error("appearance dimension {found} at keyframe {keyframe}, stream declares {expected}")]
    DimensionMismatch {
        keyframe: Keyframe,
        expected: usize,
        found: usize,
    },
    #[error("invalid association config: {0}")]
    InvalidConfig(String),
    #[error("unknown association strategy {name:?} (known: {known})")]
    UnknownStrategy { name: String, known: String },
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("actor {0} does not exist in the record")]
    UnknownActor(ActorId),
    #[error("invalid perturbation parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("unknown scenario {0:?} (known: default, camera-cut, static)")]
    UnknownScenario(String),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Association(#[from] AssociationError),
}

/// A single problem found while reading a file, located by line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {}", format_rows(.errors))]
    Rows { path: PathBuf, errors: Vec<RowError> },
    #[error("video {video_id}: {}", format_violations(.violations))]
    Invalid {
        video_id: String,
        violations: Vec<Violation>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl FormatError {
    /// True for content problems (as opposed to I/O failures).
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Rows { .. } | Self::Invalid { .. } | Self::Json(_))
    }
}

fn format_rows(errors: &[RowError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
