//! File formats.
//!
//! * Annotations (ground truth and predictions):
//!   `video_id,keyframe,x1,y1,x2,y2,action_id,actor_id[,score]`, one row per
//!   (observation, action). Prediction files carry `score`; ground-truth
//!   files must not. An empty `action_id` stands for an observation with no
//!   actions. Coordinates are normalized to `[0,1]`.
//! * Optional sidecar `<file>.meta.json` with `n_labels` and
//!   `keyframe_stride`.
//! * Detection streams: `video_id,keyframe,x1,y1,x2,y2,score,e0,..,e{D-1}`.
//! * Evaluation reports as JSON or flattened CSV, and precision/recall curves
//!   as CSV.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! parse of serialized data reproduces every `f64` bit for bit.

mod annotations;
mod report;
mod stream;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use annotations::{annotations_to_string, parse_annotations, parse_annotations_str, write_annotations};
pub use report::{
    read_report_json, report_to_csv, report_to_json, write_pr_curve, write_report, ReportFormat,
};
pub use stream::{detection_stream_to_string, parse_detection_stream, parse_detection_stream_str, write_detection_stream};

use crate::error::FormatError;
use crate::model::{DEFAULT_KEYFRAME_STRIDE, DEFAULT_N_LABELS};

/// Contents of an annotation sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarMeta {
    #[serde(default = "default_n_labels")]
    pub n_labels: u16,
    #[serde(default = "default_stride")]
    pub keyframe_stride: u32,
}

fn default_n_labels() -> u16 {
    DEFAULT_N_LABELS
}

fn default_stride() -> u32 {
    DEFAULT_KEYFRAME_STRIDE
}

impl Default for SidecarMeta {
    fn default() -> Self {
        Self {
            n_labels: DEFAULT_N_LABELS,
            keyframe_stride: DEFAULT_KEYFRAME_STRIDE,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Reads the sidecar next to `path`, or defaults when there is none.
pub fn read_sidecar(path: &Path) -> Result<SidecarMeta, FormatError> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(SidecarMeta::default());
    }
    Ok(serde_json::from_str(&read_text(&side)?)?)
}

pub fn write_sidecar(path: &Path, meta: &SidecarMeta) -> Result<(), FormatError> {
    write_text(&sidecar_path(path), &(serde_json::to_string_pretty(meta)? + "\n"))
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a finite decimal number.
pub(crate) fn parse_f64(field: &str, what: &str) -> Result<f64, String> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{what}: {field:?} is not a finite decimal number")),
    }
}

pub(crate) fn parse_int<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, String> {
    field
        .trim()
        .parse::<T>()
        .map_err(|_| format!("{what}: {field:?} is not a valid integer"))
}

pub(crate) fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>) -> Result<String, FormatError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| FormatError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}
