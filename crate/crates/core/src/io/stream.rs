use std::collections::BTreeMap;
use std::path::Path;

use crate::association::{Detection, DetectionStream};
use crate::error::{FormatError, RowError};
use crate::model::{BoundingBox, Keyframe};

use super::{csv_reader, csv_string, parse_f64, parse_int, read_text, write_text};

const BASE_COLUMNS: [&str; 7] = ["video_id", "keyframe", "x1", "y1", "x2", "y2", "score"];

/// Parses detection-stream text into one stream per video, sorted by id.
/// The embedding width is the number of `e<i>` columns in the header.
pub fn parse_detection_stream_str(text: &str, source: &Path) -> Result<Vec<DetectionStream>, FormatError> {
    let rows_err = |errors| FormatError::Rows {
        path: source.to_path_buf(),
        errors,
    };
    let mut reader = csv_reader(text);
    let header = reader.headers()?.clone();
    let base_ok = header.len() >= BASE_COLUMNS.len() && header.iter().zip(BASE_COLUMNS).all(|(h, e)| h == e);
    let dim = header.len().saturating_sub(BASE_COLUMNS.len());
    let emb_ok = header.iter().skip(BASE_COLUMNS.len()).enumerate().all(|(i, h)| h == format!("e{i}"));
    if !base_ok || !emb_ok {
        return Err(rows_err(vec![RowError {
            line: 1,
            message: format!("header must be `{},e0,..,e<D-1>`", BASE_COLUMNS.join(",")),
        }]));
    }

    let mut errors = Vec::new();
    let mut by_video: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| -> Result<(String, Detection), String> {
            if record.len() != header.len() {
                return Err(format!(
                    "expected {} embedding values, found {}",
                    dim,
                    record.len() as isize - BASE_COLUMNS.len() as isize
                ));
            }
            let keyframe = parse_int::<Keyframe>(&record[1], "keyframe")?;
            let c: Vec<f64> = (2..6).map(|i| parse_f64(&record[i], BASE_COLUMNS[i])).collect::<Result<_, _>>()?;
            let bbox = BoundingBox::new(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())?;
            let score = parse_f64(&record[6], "score")?;
            let appearance = (0..dim)
                .map(|i| parse_f64(&record[7 + i], "embedding"))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((
                record[0].to_string(),
                Detection {
                    keyframe,
                    bbox,
                    score,
                    appearance,
                },
            ))
        })();
        match parsed {
            Ok((video, det)) => by_video.entry(video).or_default().push(det),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(rows_err(errors));
    }
    Ok(by_video
        .into_iter()
        .map(|(video_id, dets)| DetectionStream::new(video_id, dim, dets).expect("row widths checked above"))
        .collect())
}

pub fn parse_detection_stream(path: &Path) -> Result<Vec<DetectionStream>, FormatError> {
    parse_detection_stream_str(&read_text(path)?, path)
}

/// Serializes streams; all must share one embedding width.
pub fn detection_stream_to_string(streams: &[DetectionStream]) -> Result<String, FormatError> {
    let dim = streams.first().map_or(0, |s| s.dim);
    if let Some(s) = streams.iter().find(|s| s.dim != dim) {
        return Err(FormatError::Rows {
            path: "<detections>".into(),
            errors: vec![RowError {
                line: 0,
                message: format!("stream {} has width {}, expected {dim}", s.video_id, s.dim),
            }],
        });
    }
    csv_string(|w| {
        let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..dim).map(|i| format!("e{i}")));
        w.write_record(&header)?;
        for s in streams {
            for d in s.detections() {
                let mut row = vec![
                    s.video_id.clone(),
                    d.keyframe.to_string(),
                    d.bbox.x1.to_string(),
                    d.bbox.y1.to_string(),
                    d.bbox.x2.to_string(),
                    d.bbox.y2.to_string(),
                    d.score.to_string(),
                ];
                row.extend(d.appearance.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        Ok(())
    })
}

pub fn write_detection_stream(path: &Path, streams: &[DetectionStream]) -> Result<(), FormatError> {
    write_text(path, &detection_stream_to_string(streams)?)
}
