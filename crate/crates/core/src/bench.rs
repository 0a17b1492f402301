//! Online versus offline association on seeded synthetic scenarios.
//!
//! For every seed the scenario is generated once; each mode then tracks the
//! same detection stream, the simulated classifier labels are attached to
//! the tracked boxes, and the result is evaluated against ground truth.
//! Boxes and labels are identical across modes, so only the identity
//! metrics can differ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{to_record, AssociatorRegistry, ConfigOverrides};
use crate::error::BenchError;
use crate::eval::{evaluate, EvalConfig};
use crate::synth::{generate, ScenarioSpec};

/// One `(seed, mode)` result. Column order matches the bench CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub mode: String,
    pub ap50: Option<f64>,
    pub hl50: Option<f64>,
    pub idf1: f64,
    pub mt_pct: f64,
    pub ml_pct: f64,
    pub id_switches: usize,
}

pub const BENCH_COLUMNS: [&str; 8] = ["seed", "mode", "ap50", "hl50", "idf1", "mt_pct", "ml_pct", "id_switches"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Template scenario; its seed is replaced per run.
    pub scenario: ScenarioSpec,
    pub seeds: Vec<u64>,
    pub modes: Vec<String>,
    pub overrides: ConfigOverrides,
    pub eval: EvalConfig,
}

impl BenchConfig {
    /// Seeds `0..k` on `scenario` with both built-in modes.
    pub fn new(scenario: ScenarioSpec, k: u64) -> Self {
        Self {
            scenario,
            seeds: (0..k).collect(),
            modes: vec!["online".into(), "offline".into()],
            overrides: ConfigOverrides::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn run_seed(cfg: &BenchConfig, registry: &AssociatorRegistry, seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    let spec = ScenarioSpec { seed, ..cfg.scenario.clone() };
    let scenario = generate(&spec)?;
    let mut rows = Vec::with_capacity(cfg.modes.len());
    for mode in &cfg.modes {
        let tracker = registry.build(mode, &cfg.overrides)?;
        let ids = tracker.assign_ids(&scenario.stream)?;
        let pred = to_record(&scenario.stream, &ids, Some(&scenario.detection_labels)).with_n_labels(spec.n_labels);
        let report = evaluate(std::slice::from_ref(&scenario.gt), &[pred], &cfg.eval);
        let m = report.aggregate;
        rows.push(BenchRow {
            seed,
            mode: mode.clone(),
            ap50: m.ap,
            hl50: m.hl,
            idf1: m.idf1,
            mt_pct: m.mt_pct,
            ml_pct: m.ml_pct,
            id_switches: m.id_switches,
        });
    }
    Ok(rows)
}

/// Runs every seed (in parallel on the current rayon pool) and returns rows
/// ordered by seed, then by the configured mode order.
pub fn run_bench(cfg: &BenchConfig, registry: &AssociatorRegistry) -> Result<Vec<BenchRow>, BenchError> {
    for mode in &cfg.modes {
        registry.resolve(mode, &cfg.overrides)?.validate()?;
    }
    cfg.scenario.validate()?;
    let per_seed: Vec<Vec<BenchRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, registry, seed))
        .collect::<Result<_, _>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// CSV table with [`BENCH_COLUMNS`]; a null metric is an empty cell.
pub fn bench_to_csv(rows: &[BenchRow]) -> Result<String, crate::error::FormatError> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    crate::io::csv_string(|w| {
        w.write_record(BENCH_COLUMNS)?;
        for r in rows {
            w.write_record([
                r.seed.to_string(),
                r.mode.clone(),
                opt(r.ap50),
                opt(r.hl50),
                r.idf1.to_string(),
                r.mt_pct.to_string(),
                r.ml_pct.to_string(),
                r.id_switches.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Per-mode means and totals over a bench table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub runs: usize,
    pub mean_ap50: Option<f64>,
    pub mean_idf1: f64,
    pub total_id_switches: usize,
}

pub fn summarize(rows: &[BenchRow]) -> Vec<ModeSummary> {
    let mut modes: Vec<&str> = Vec::new();
    for r in rows {
        if !modes.contains(&r.mode.as_str()) {
            modes.push(&r.mode);
        }
    }
    modes
        .into_iter()
        .map(|mode| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let n = sel.len();
            let aps: Option<Vec<f64>> = sel.iter().map(|r| r.ap50).collect();
            ModeSummary {
                mode: mode.to_string(),
                runs: n,
                mean_ap50: aps.map(|v| v.iter().sum::<f64>() / n as f64),
                mean_idf1: sel.iter().map(|r| r.idf1).sum::<f64>() / n as f64,
                total_id_switches: sel.iter().map(|r| r.id_switches).sum(),
            }
        })
        .collect()
}
