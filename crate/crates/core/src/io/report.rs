use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detection::PrCurve;
use crate::error::FormatError;
use crate::eval::{EvalReport, MetricBlock};

use super::{csv_string, read_text, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(format!("unknown report format {s:?} (json, csv)")),
        }
    }
}

pub fn report_to_json(report: &EvalReport) -> Result<String, FormatError> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn block_row(scope: &str, video_id: &str, m: &MetricBlock) -> Vec<String> {
    vec![
        scope.to_string(),
        video_id.to_string(),
        opt(m.ap),
        m.ap_reason.clone().unwrap_or_default(),
        m.tp.to_string(),
        m.fp.to_string(),
        m.fn_.to_string(),
        m.idf1.to_string(),
        m.idf1_vacuous.to_string(),
        m.idtp.to_string(),
        m.idfp.to_string(),
        m.idfn.to_string(),
        m.n_gt_tracks.to_string(),
        m.mt.to_string(),
        m.ml.to_string(),
        m.mt_pct.to_string(),
        m.ml_pct.to_string(),
        m.id_switches.to_string(),
        opt(m.hl),
        m.hl_reason.clone().unwrap_or_default(),
        m.hl_xor_bits.to_string(),
        m.n_pairs.to_string(),
        m.n_labels.to_string(),
    ]
}

/// Aggregate row first, then one row per video. The AP and HL columns are
/// named after the configured gate; empty cells stand for null.
pub fn report_to_csv(report: &EvalReport) -> Result<String, FormatError> {
    csv_string(|w| {
        let names = &report.metric_names;
        w.write_record([
            "scope",
            "video_id",
            &names.ap,
            "ap_reason",
            "tp",
            "fp",
            "fn",
            "idf1",
            "idf1_vacuous",
            "idtp",
            "idfp",
            "idfn",
            "n_gt_tracks",
            "mt",
            "ml",
            "mt_pct",
            "ml_pct",
            "id_switches",
            &names.hl,
            "hl_reason",
            "hl_xor_bits",
            "n_pairs",
            "n_labels",
        ])?;
        w.write_record(block_row("aggregate", "", &report.aggregate))?;
        for v in &report.videos {
            w.write_record(block_row("video", &v.video_id, &v.metrics))?;
        }
        Ok(())
    })
}

pub fn write_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<(), FormatError> {
    let text = match format {
        ReportFormat::Json => report_to_json(report)?,
        ReportFormat::Csv => report_to_csv(report)?,
    };
    write_text(path, &text)
}

pub fn read_report_json(path: &Path) -> Result<EvalReport, FormatError> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// `rank,score,tp,fp,recall,precision,p_interp`, one row per ranked
/// prediction.
pub fn write_pr_curve(curve: &PrCurve, path: &Path) -> Result<(), FormatError> {
    let text = csv_string(|w| {
        w.write_record(["rank", "score", "tp", "fp", "recall", "precision", "p_interp"])?;
        for p in &curve.points {
            w.write_record([
                p.rank.to_string(),
                p.score.to_string(),
                p.tp.to_string(),
                p.fp.to_string(),
                p.recall.to_string(),
                p.precision.to_string(),
                p.p_interp.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate, EvalConfig};
    use crate::model::{ActionLabelSet, ActorObservation, BoundingBox, Role, VideoRecord};

    fn report() -> EvalReport {
        let mut gt = VideoRecord::new("v", Role::Gt);
        let mut pred = VideoRecord::new("v", Role::Pred);
        let b = BoundingBox::new_unchecked(0.1, 0.1, 0.4, 0.4);
        gt.push(ActorObservation::gt("v", 0, b, 0, ActionLabelSet::from([1])));
        pred.push(ActorObservation::pred("v", 0, BoundingBox::new_unchecked(0.6, 0.6, 0.9, 0.9), 0, ActionLabelSet::new(), 0.3));
        evaluate(&[gt], &[pred], &EvalConfig::default())
    }

    #[test]
    fn null_hl_is_explicit() {
        let json = report_to_json(&report()).unwrap();
        assert!(json.contains("\"hl\": null"));
        assert!(json.contains("\"hl_reason\": \"no pairs"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report());
    }

    #[test]
    fn csv_has_aggregate_then_videos() {
        let csv = report_to_csv(&report()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("scope,video_id,AP@0.5,"));
        assert!(lines[1].starts_with("aggregate,,0,"));
        assert!(lines[2].starts_with("video,v,0,"));
    }
}
