//! Detection dumps as JSON Lines:
//! `{"image_id":"a","class":1,"box":[x1,y1,x2,y2],"score":0.9}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetError, MAX_CLASS_ID};
use crate::eval::Detection;
use crate::model::BoxF;

#[derive(Debug, Serialize, Deserialize)]
struct DetectionLine {
    image_id: String,
    class: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    score: f64,
}

/// Parses detection lines; never panics on malformed input.
pub fn parse_detections_str(text: &str) -> Result<Vec<Detection>, DatasetError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: DetectionLine = serde_json::from_str(raw).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.class == 0 || line.class > MAX_CLASS_ID {
            return Err(DatasetError::Invalid {
                line: line_no,
                message: format!("class {} outside 1..={MAX_CLASS_ID}", line.class),
            });
        }
        if !line.score.is_finite() {
            return Err(DatasetError::Invalid {
                line: line_no,
                message: "score must be finite".to_string(),
            });
        }
        let [x1, y1, x2, y2] = line.bbox;
        out.push(Detection {
            image_id: line.image_id,
            class_id: line.class,
            bbox: BoxF::new(x1, y1, x2, y2),
            score: line.score,
        });
    }
    Ok(out)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>, DatasetError> {
    parse_detections_str(&fs::read_to_string(path)?)
}

pub fn write_detections<W: Write>(mut out: W, detections: &[Detection]) -> std::io::Result<()> {
    for det in detections {
        let line = DetectionLine {
            image_id: det.image_id.clone(),
            class: det.class_id,
            bbox: [det.bbox.x1, det.bbox.y1, det.bbox.x2, det.bbox.y2],
            score: det.score,
        };
        out.write_all(serde_json::to_string(&line).expect("detections serialize").as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_detections(path: impl AsRef<Path>, detections: &[Detection]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    write_detections(&mut buf, detections)?;
    fs::write(path, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let dets = vec![
            Detection {
                image_id: "a".into(),
                class_id: 2,
                bbox: BoxF::new(0.5, 1.5, 10.25, 20.125),
                score: 0.875,
            },
            Detection {
                image_id: "b".into(),
                class_id: 1,
                bbox: BoxF::new(3.0, 4.0, 5.0, 6.0),
                score: 0.25,
            },
        ];
        let mut buf = Vec::new();
        write_detections(&mut buf, &dets).unwrap();
        let back = parse_detections_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, dets);
    }

    #[test]
    fn background_class_is_rejected() {
        let text = r#"{"image_id":"a","class":0,"box":[0,0,1,1],"score":0.5}"#;
        assert!(matches!(
            parse_detections_str(text),
            Err(DatasetError::Invalid { line: 1, .. })
        ));
    }
}
