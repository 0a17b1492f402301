//! Full evaluation of a prediction set against ground truth, producing an
//! [`EvalReport`] with per-video and aggregate metric blocks.
//!
//! Videos are scored in parallel on the current rayon pool. Per-video blocks
//! are sorted by `video_id` and the aggregate is built from their summed
//! tallies, so the report does not depend on scheduling. The aggregate AP is
//! computed from one ranking pooled over all videos.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{hamming_loss, hamming_loss_from_counts, match_pairs};
use crate::detection::{average_precision, ApResult, PrCurve};
use crate::identity::{id_match, id_switches, mt_ml_for_record, MtMl};
use crate::matching::DEFAULT_IOU_THRESHOLD;
use crate::model::{Role, VideoRecord, DEFAULT_N_LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Overrides the label count declared by the ground-truth records.
    #[serde(default)]
    pub n_labels: Option<u16>,
    /// Predictions scoring below this are ignored for the Hamming loss.
    #[serde(default)]
    pub score_cutoff: Option<f64>,
    /// Keep a GT actor's previous identity when it still matches before
    /// re-solving the keyframe assignment (CLEAR MOT convention).
    #[serde(default = "default_true")]
    pub id_switch_persistence: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            n_labels: None,
            score_cutoff: None,
            id_switch_persistence: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(format!("iou threshold {} outside (0,1]", self.iou_threshold));
        }
        if self.n_labels == Some(0) {
            return Err("n_labels must be at least 1".into());
        }
        Ok(())
    }

    /// `"AP@0.5"`-style metric names for the configured gate.
    pub fn metric_names(&self) -> MetricNames {
        MetricNames {
            ap: format!("AP@{}", self.iou_threshold),
            hl: format!("HL@{}", self.iou_threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricNames {
    pub ap: String,
    pub hl: String,
}

/// Metric values with the raw counts they are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub ap: Option<f64>,
    pub ap_reason: Option<String>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idf1: f64,
    /// No identities on either side; `idf1` is 1.0 by convention.
    pub idf1_vacuous: bool,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub n_gt_tracks: usize,
    pub mt: usize,
    pub ml: usize,
    pub mt_pct: f64,
    pub ml_pct: f64,
    pub id_switches: usize,
    pub hl: Option<f64>,
    pub hl_reason: Option<String>,
    pub hl_xor_bits: u64,
    /// Actor pairs matched at the IoU gate.
    pub n_pairs: usize,
    pub n_labels: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoBlock {
    pub video_id: String,
    pub metrics: MetricBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config: EvalConfig,
    /// Free-form provenance such as input paths.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    pub metric_names: MetricNames,
    pub aggregate: MetricBlock,
    pub videos: Vec<VideoBlock>,
}

/// Report plus the pooled precision/recall curve behind the aggregate AP.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub curve: PrCurve,
}

fn idf1_fields(idtp: usize, idfp: usize, idfn: usize) -> (f64, bool) {
    let denom = 2 * idtp + idfp + idfn;
    if denom == 0 {
        (1.0, true)
    } else {
        (2.0 * idtp as f64 / denom as f64, false)
    }
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

fn score_video(gt: &VideoRecord, pred: &VideoRecord, cfg: &EvalConfig, n_labels: u16) -> MetricBlock {
    let thr = cfg.iou_threshold;
    let ap: ApResult = average_precision(std::slice::from_ref(gt), std::slice::from_ref(pred), thr);
    let ids = id_match(gt, pred, thr);
    let (idf1, idf1_vacuous) = idf1_fields(ids.idtp, ids.idfp, ids.idfn);
    // Records are validated before evaluation, so tracklets always build.
    let mtml = mt_ml_for_record(gt, pred, thr).unwrap_or_else(|_| MtMl::from_coverage(Vec::new()));
    let hl = hamming_loss(&match_pairs(gt, pred, thr, cfg.score_cutoff), n_labels);
    MetricBlock {
        ap: ap.ap,
        ap_reason: ap.reason,
        tp: ap.tally.tp,
        fp: ap.tally.fp,
        fn_: ap.tally.fn_,
        idf1,
        idf1_vacuous,
        idtp: ids.idtp,
        idfp: ids.idfp,
        idfn: ids.idfn,
        n_gt_tracks: mtml.n_tracks,
        mt: mtml.mt,
        ml: mtml.ml,
        mt_pct: mtml.mt_pct,
        ml_pct: mtml.ml_pct,
        id_switches: id_switches(gt, pred, thr, cfg.id_switch_persistence),
        hl: hl.value,
        hl_reason: hl.reason,
        hl_xor_bits: hl.xor_bits,
        n_pairs: hl.n_pairs,
        n_labels,
    }
}

/// Label count used for the Hamming loss: the override, else the largest
/// count declared by the ground truth, else the default.
pub fn resolve_n_labels(cfg: &EvalConfig, gt: &[VideoRecord]) -> u16 {
    cfg.n_labels
        .or_else(|| gt.iter().map(|r| r.n_labels).max())
        .unwrap_or(DEFAULT_N_LABELS)
}

/// Scores `pred` against `gt`. Videos are paired by id; a video missing on
/// one side is scored against an empty record.
pub fn evaluate_detailed(gt: &[VideoRecord], pred: &[VideoRecord], cfg: &EvalConfig) -> Evaluation {
    let n_labels = resolve_n_labels(cfg, gt);
    let gt_by: BTreeMap<&str, &VideoRecord> = gt.iter().map(|r| (r.video_id.as_str(), r)).collect();
    let pred_by: BTreeMap<&str, &VideoRecord> = pred.iter().map(|r| (r.video_id.as_str(), r)).collect();
    let ids: Vec<&str> = gt_by.keys().chain(pred_by.keys()).copied().collect::<BTreeSet<_>>().into_iter().collect();

    let pairs: Vec<(VideoRecord, VideoRecord)> = ids
        .iter()
        .map(|id| {
            let g = gt_by.get(id).map_or_else(|| VideoRecord::new(*id, Role::Gt), |r| (*r).clone());
            let p = pred_by.get(id).map_or_else(|| VideoRecord::new(*id, Role::Pred), |r| (*r).clone());
            (g, p)
        })
        .collect();

    let videos: Vec<VideoBlock> = pairs
        .par_iter()
        .map(|(g, p)| VideoBlock {
            video_id: g.video_id.clone(),
            metrics: score_video(g, p, cfg, n_labels),
        })
        .collect();

    let (all_gt, all_pred): (Vec<VideoRecord>, Vec<VideoRecord>) = pairs.into_iter().unzip();
    let pooled = average_precision(&all_gt, &all_pred, cfg.iou_threshold);
    let aggregate = aggregate(&videos, pooled.ap, pooled.reason, n_labels);
    Evaluation {
        report: EvalReport {
            tool_version: crate::VERSION.to_string(),
            config: cfg.clone(),
            inputs: BTreeMap::new(),
            metric_names: cfg.metric_names(),
            aggregate,
            videos,
        },
        curve: pooled.curve,
    }
}

pub fn evaluate(gt: &[VideoRecord], pred: &[VideoRecord], cfg: &EvalConfig) -> EvalReport {
    evaluate_detailed(gt, pred, cfg).report
}

fn aggregate(videos: &[VideoBlock], ap: Option<f64>, ap_reason: Option<String>, n_labels: u16) -> MetricBlock {
    let sum = |f: fn(&MetricBlock) -> usize| videos.iter().map(|v| f(&v.metrics)).sum::<usize>();
    let (idtp, idfp, idfn) = (sum(|m| m.idtp), sum(|m| m.idfp), sum(|m| m.idfn));
    let (idf1, idf1_vacuous) = idf1_fields(idtp, idfp, idfn);
    let (n_gt_tracks, mt, ml) = (sum(|m| m.n_gt_tracks), sum(|m| m.mt), sum(|m| m.ml));
    let xor_bits = videos.iter().map(|v| v.metrics.hl_xor_bits).sum();
    let hl = hamming_loss_from_counts(xor_bits, sum(|m| m.n_pairs), n_labels);
    MetricBlock {
        ap,
        ap_reason,
        tp: sum(|m| m.tp),
        fp: sum(|m| m.fp),
        fn_: sum(|m| m.fn_),
        idf1,
        idf1_vacuous,
        idtp,
        idfp,
        idfn,
        n_gt_tracks,
        mt,
        ml,
        mt_pct: percent(mt, n_gt_tracks),
        ml_pct: percent(ml, n_gt_tracks),
        id_switches: sum(|m| m.id_switches),
        hl: hl.value,
        hl_reason: hl.reason,
        hl_xor_bits: xor_bits,
        n_pairs: hl.n_pairs,
        n_labels,
    }
}
