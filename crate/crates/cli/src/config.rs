//! Optional JSON config files. Keys mirror the long flags (with `_` for
//! `-`); unknown keys are rejected and flags take precedence.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Flag value if given, else the config file's.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateFile {
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub iou: Option<f64>,
    pub labels: Option<u16>,
    pub report: Option<PathBuf>,
    pub format: Option<String>,
    pub per_video: Option<bool>,
    pub pr_curve: Option<PathBuf>,
    pub score_cutoff: Option<f64>,
    pub no_switch_persistence: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackFile {
    pub detections: Option<PathBuf>,
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub gap: Option<u32>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub scenario: Option<String>,
    pub n_actors: Option<u32>,
    pub n_keyframes: Option<u32>,
    pub n_cuts: Option<u32>,
    pub p_miss: Option<f64>,
    pub p_fp: Option<f64>,
    pub p_act: Option<f64>,
    pub sigma_box: Option<f64>,
    pub sigma_app: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub scenario: Option<String>,
    pub n_actors: Option<u32>,
    pub n_keyframes: Option<u32>,
    pub n_cuts: Option<u32>,
    pub p_miss: Option<f64>,
    pub p_fp: Option<f64>,
    pub p_act: Option<f64>,
    pub sigma_box: Option<f64>,
    pub sigma_app: Option<f64>,
    pub seeds: Option<u64>,
    pub out: Option<PathBuf>,
}

impl SynthFile {
    pub fn scenario_args(&self) -> crate::ScenarioArgs {
        crate::ScenarioArgs {
            scenario: self.scenario.clone(),
            n_actors: self.n_actors,
            n_keyframes: self.n_keyframes,
            n_cuts: self.n_cuts,
            p_miss: self.p_miss,
            p_fp: self.p_fp,
            p_act: self.p_act,
            sigma_box: self.sigma_box,
            sigma_app: self.sigma_app,
        }
    }
}

impl BenchFile {
    pub fn scenario_args(&self) -> crate::ScenarioArgs {
        crate::ScenarioArgs {
            scenario: self.scenario.clone(),
            n_actors: self.n_actors,
            n_keyframes: self.n_keyframes,
            n_cuts: self.n_cuts,
            p_miss: self.p_miss,
            p_fp: self.p_fp,
            p_act: self.p_act,
            sigma_box: self.sigma_box,
            sigma_app: self.sigma_app,
        }
    }
}
