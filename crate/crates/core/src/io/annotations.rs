use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{FormatError, RowError};
use crate::model::{validate_record, ActionLabelSet, ActorId, ActorObservation, BoundingBox, Keyframe, Role, VideoRecord};

use super::{csv_reader, csv_string, parse_f64, parse_int, read_sidecar, read_text, write_sidecar, write_text, SidecarMeta};

const BASE_COLUMNS: [&str; 8] = ["video_id", "keyframe", "x1", "y1", "x2", "y2", "action_id", "actor_id"];

struct Pending {
    line: u64,
    bbox: BoundingBox,
    score: f64,
    actions: ActionLabelSet,
}

struct Row {
    video_id: String,
    keyframe: Keyframe,
    actor_id: ActorId,
    bbox: BoundingBox,
    action: Option<u16>,
    score: f64,
}

fn parse_row(fields: &csv::StringRecord, with_score: bool, n_labels: u16) -> Result<Row, String> {
    let expected = if with_score { 9 } else { 8 };
    if fields.len() != expected {
        return Err(format!("expected {expected} columns, found {}", fields.len()));
    }
    let video_id = fields[0].to_string();
    if video_id.is_empty() {
        return Err("video_id is empty".into());
    }
    let keyframe = parse_int::<Keyframe>(&fields[1], "keyframe")?;
    let c: Vec<f64> = (2..6)
        .map(|i| parse_f64(&fields[i], BASE_COLUMNS[i]))
        .collect::<Result<_, _>>()?;
    let bbox = BoundingBox::new_unchecked(c[0], c[1], c[2], c[3]);
    if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(format!("coordinate outside [0,1] in ({}, {}, {}, {})", c[0], c[1], c[2], c[3]));
    }
    if !(c[2] > c[0] && c[3] > c[1]) {
        return Err(format!("degenerate box: need x1 < x2 and y1 < y2, got ({}, {}, {}, {})", c[0], c[1], c[2], c[3]));
    }
    let action = if fields[6].is_empty() {
        None
    } else {
        let a = parse_int::<u16>(&fields[6], "action_id")?;
        if a < 1 || a > n_labels {
            return Err(format!("action_id {a} outside [1, {n_labels}]"));
        }
        Some(a)
    };
    let actor_id = parse_int::<ActorId>(&fields[7], "actor_id")?;
    let score = if with_score {
        let s = parse_f64(&fields[8], "score")?;
        if !(0.0..=1.0).contains(&s) {
            return Err(format!("score {s} outside [0,1]"));
        }
        s
    } else {
        1.0
    };
    Ok(Row {
        video_id,
        keyframe,
        actor_id,
        bbox,
        action,
        score,
    })
}

/// Parses annotation text. `source` names the input in errors.
pub fn parse_annotations_str(
    text: &str,
    role: Role,
    meta: &SidecarMeta,
    source: &Path,
) -> Result<Vec<VideoRecord>, FormatError> {
    let rows_err = |errors| FormatError::Rows {
        path: source.to_path_buf(),
        errors,
    };
    let mut reader = csv_reader(text);
    let header = reader.headers()?.clone();
    let header: Vec<&str> = header.iter().collect();
    let with_score = role == Role::Pred;
    let mut expected: Vec<&str> = BASE_COLUMNS.to_vec();
    if with_score {
        expected.push("score");
    }
    if header != expected {
        let message = match (role, header.last()) {
            (Role::Gt, Some(&"score")) => "score column is not allowed in ground truth".to_string(),
            _ => format!("header must be `{}`, found `{}`", expected.join(","), header.join(",")),
        };
        return Err(rows_err(vec![RowError { line: 1, message }]));
    }

    let mut errors = Vec::new();
    let mut groups: BTreeMap<(String, Keyframe, ActorId), Pending> = BTreeMap::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let row = match parse_row(&record, with_score, meta.n_labels) {
            Ok(r) => r,
            Err(message) => {
                errors.push(RowError { line, message });
                continue;
            }
        };
        let key = (row.video_id, row.keyframe, row.actor_id);
        match groups.get_mut(&key) {
            Some(p) => {
                if p.bbox != row.bbox || p.score.to_bits() != row.score.to_bits() {
                    errors.push(RowError {
                        line,
                        message: format!(
                            "box or score conflicts with line {} for video {} keyframe {} actor {}",
                            p.line, key.0, key.1, key.2
                        ),
                    });
                    continue;
                }
                p.actions.extend(row.action);
            }
            None => {
                let actions: ActionLabelSet = row.action.into_iter().collect();
                groups.insert(
                    key,
                    Pending {
                        line,
                        bbox: row.bbox,
                        score: row.score,
                        actions,
                    },
                );
            }
        }
    }
    if !errors.is_empty() {
        return Err(rows_err(errors));
    }

    let mut records: BTreeMap<String, VideoRecord> = BTreeMap::new();
    for ((video_id, keyframe, actor_id), p) in groups {
        let rec = records.entry(video_id.clone()).or_insert_with(|| {
            VideoRecord::new(video_id.clone(), role)
                .with_n_labels(meta.n_labels)
                .with_stride(meta.keyframe_stride)
        });
        rec.push(ActorObservation {
            video_id,
            keyframe,
            bbox: p.bbox,
            actor_id,
            actions: p.actions,
            score: p.score,
            appearance: None,
        });
    }
    let records: Vec<VideoRecord> = records.into_values().collect();
    for r in &records {
        let violations = validate_record(r);
        if !violations.is_empty() {
            return Err(FormatError::Invalid {
                video_id: r.video_id.clone(),
                violations,
            });
        }
    }
    Ok(records)
}

/// Reads an annotation file and its optional sidecar.
pub fn parse_annotations(path: &Path, role: Role) -> Result<Vec<VideoRecord>, FormatError> {
    let meta = read_sidecar(path)?;
    parse_annotations_str(&read_text(path)?, role, &meta, path)
}

/// Serializes records in canonical row order. Prediction files carry a
/// score column.
pub fn annotations_to_string(records: &[VideoRecord], role: Role) -> Result<String, FormatError> {
    let with_score = role == Role::Pred;
    let mut sorted: Vec<&VideoRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    csv_string(|w| {
        let mut header = BASE_COLUMNS.to_vec();
        if with_score {
            header.push("score");
        }
        w.write_record(&header)?;
        for rec in sorted {
            for o in rec.observations() {
                let actions: Vec<String> = if o.actions.is_empty() {
                    vec![String::new()]
                } else {
                    o.actions.iter().map(|a| a.to_string()).collect()
                };
                for action in actions {
                    let mut row = vec![
                        o.video_id.clone(),
                        o.keyframe.to_string(),
                        o.bbox.x1.to_string(),
                        o.bbox.y1.to_string(),
                        o.bbox.x2.to_string(),
                        o.bbox.y2.to_string(),
                        action,
                        o.actor_id.to_string(),
                    ];
                    if with_score {
                        row.push(o.score.to_string());
                    }
                    w.write_record(&row)?;
                }
            }
        }
        Ok(())
    })
}

/// Writes the CSV plus a sidecar taken from the first record.
pub fn write_annotations(path: &Path, records: &[VideoRecord], role: Role) -> Result<(), FormatError> {
    write_text(path, &annotations_to_string(records, role)?)?;
    let meta = records.first().map_or_else(SidecarMeta::default, |r| SidecarMeta {
        n_labels: r.n_labels,
        keyframe_stride: r.keyframe_stride,
    });
    write_sidecar(path, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, role: Role) -> Result<Vec<VideoRecord>, FormatError> {
        parse_annotations_str(text, role, &SidecarMeta::default(), Path::new("t.csv"))
    }

    const GT_HEADER: &str = "video_id,keyframe,x1,y1,x2,y2,action_id,actor_id\n";

    #[test]
    fn rows_group_into_one_multilabel_observation() {
        let text = format!("{GT_HEADER}v,3,0.1,0.2,0.3,0.4,12,7\nv,3,0.1,0.2,0.3,0.4,79,7\n");
        let recs = parse(&text, Role::Gt).unwrap();
        assert_eq!(recs.len(), 1);
        let obs: Vec<_> = recs[0].observations().collect();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].actions, ActionLabelSet::from([12, 79]));
    }

    #[test]
    fn inverted_box_names_the_line() {
        let text = format!("{GT_HEADER}v,0,0.1,0.1,0.2,0.2,1,0\nv,1,0.5,0.1,0.2,0.2,1,0\n");
        match parse(&text, Role::Gt) {
            Err(FormatError::Rows { errors, .. }) => {
                assert_eq!(errors.len(), 1);
                assert_eq!(errors[0].line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse(GT_HEADER, Role::Gt).unwrap().is_empty());
    }

    #[test]
    fn crlf_is_accepted() {
        let text = "video_id,keyframe,x1,y1,x2,y2,action_id,actor_id\r\nv,0,0.1,0.1,0.2,0.2,1,0\r\n";
        assert_eq!(parse(text, Role::Gt).unwrap()[0].len(), 1);
    }

    #[test]
    fn score_column_rules() {
        let pred_text = "video_id,keyframe,x1,y1,x2,y2,action_id,actor_id,score\nv,0,0.1,0.1,0.2,0.2,,0,0.5\n";
        assert!(parse(pred_text, Role::Gt).is_err());
        let p = parse(pred_text, Role::Pred).unwrap();
        assert!(p[0].observations().next().unwrap().actions.is_empty());
        assert!(parse(GT_HEADER, Role::Pred).is_err());
    }

    #[test]
    fn geometry_conflict_and_bad_numbers() {
        let text = format!("{GT_HEADER}v,0,0.1,0.1,0.2,0.2,1,0\nv,0,0.1,0.1,0.25,0.2,2,0\nv,x,0.1,0.1,0.2,0.2,1,0\nv,0,0.1,0.1,0.2,1.2,1,1\nv,0,0.1,0.1,0.2,0.2,81,2\n");
        match parse(&text, Role::Gt) {
            Err(FormatError::Rows { errors, .. }) => {
                assert_eq!(errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_gt_labels_fail_validation() {
        let text = format!("{GT_HEADER}v,0,0.1,0.1,0.2,0.2,,0\n");
        assert!(matches!(parse(&text, Role::Gt), Err(FormatError::Invalid { .. })));
    }

    #[test]
    fn serialize_then_parse() {
        let text = format!("{GT_HEADER}b,1,0.1,0.2,0.30000000000000004,0.4,5,1\na,0,0.1,0.2,0.3,0.4,2,3\na,0,0.1,0.2,0.3,0.4,1,3\n");
        let recs = parse(&text, Role::Gt).unwrap();
        let out = annotations_to_string(&recs, Role::Gt).unwrap();
        assert_eq!(
            out,
            format!("{GT_HEADER}a,0,0.1,0.2,0.3,0.4,1,3\na,0,0.1,0.2,0.3,0.4,2,3\nb,1,0.1,0.2,0.30000000000000004,0.4,5,1\n")
        );
        assert_eq!(parse(&out, Role::Gt).unwrap(), recs);
    }
}
