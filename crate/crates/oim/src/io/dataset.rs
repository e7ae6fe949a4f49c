//! JSON Lines dataset format: one record per image.
//!
//! ```json
//! {"image_id":"a","width":512.0,"height":512.0,"labels":[1,3],
//!  "proposals":[{"box":[x1,y1,x2,y2],"feature":[...]}],
//!  "gt":[{"box":[x1,y1,x2,y2],"class":1}]}
//! ```
//!
//! `gt` is optional. Scores are not stored; they are filled by a head or
//! the oracle scorer after loading. Every parse or validation error
//! carries its 1-based line number.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_proposal_set, BoxF, Dataset, GroundTruth, GtInstance, ImageRecord, ProposalSet,
    Violation,
};

/// Hard cap on class ids, so a corrupted file cannot demand absurd score
/// matrices.
pub const MAX_CLASS_ID: usize = 1024;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct ProposalLine {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    feature: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GtLine {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficult: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetLine {
    image_id: String,
    width: f64,
    height: f64,
    labels: Vec<usize>,
    proposals: Vec<ProposalLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt: Option<Vec<GtLine>>,
}

/// A loaded dataset plus non-fatal warnings (empty file, ignored
/// `difficult` flags, duplicate ids, label-free records).
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Parses dataset text. The class count is the largest class id seen in
/// labels or ground truth; the feature dimension comes from the first
/// proposal and must be consistent everywhere.
pub fn parse_dataset_str(text: &str) -> Result<LoadReport, DatasetError> {
    let mut warnings = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine =
            serde_json::from_str(raw).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        lines.push((line_no, parsed));
    }
    if lines.is_empty() {
        warnings.push("dataset file has no records".to_string());
        return Ok(LoadReport {
            dataset: Dataset {
                records: Vec::new(),
                num_classes: 0,
                feature_dim: 0,
            },
            warnings,
        });
    }

    let mut num_classes = 0usize;
    for (line_no, line) in &lines {
        for &label in &line.labels {
            if label == 0 || label > MAX_CLASS_ID {
                return Err(DatasetError::Invalid {
                    line: *line_no,
                    message: format!("label {label} outside 1..={MAX_CLASS_ID}"),
                });
            }
            num_classes = num_classes.max(label);
        }
        if let Some(gt) = &line.gt {
            for inst in gt {
                if inst.class == 0 || inst.class > MAX_CLASS_ID {
                    return Err(DatasetError::Invalid {
                        line: *line_no,
                        message: format!("gt class {} outside 1..={MAX_CLASS_ID}", inst.class),
                    });
                }
                num_classes = num_classes.max(inst.class);
            }
        }
    }

    let feature_dim = lines[0]
        .1
        .proposals
        .first()
        .map_or(0, |p| p.feature.len());
    let mut records = Vec::with_capacity(lines.len());
    let mut seen_ids: Vec<&str> = Vec::new();
    for (line_no, line) in &lines {
        if !(line.width.is_finite() && line.width > 0.0)
            || !(line.height.is_finite() && line.height > 0.0)
        {
            return Err(DatasetError::Invalid {
                line: *line_no,
                message: "width and height must be positive and finite".to_string(),
            });
        }
        if seen_ids.contains(&line.image_id.as_str()) {
            warnings.push(format!(
                "line {line_no}: duplicate image_id `{}`",
                line.image_id
            ));
        }
        seen_ids.push(line.image_id.as_str());

        let mut boxes = Vec::with_capacity(line.proposals.len());
        let mut features = Vec::with_capacity(line.proposals.len());
        for (pi, prop) in line.proposals.iter().enumerate() {
            if prop.feature.len() != feature_dim {
                return Err(DatasetError::Invalid {
                    line: *line_no,
                    message: format!(
                        "proposal {pi} has feature length {}, expected {feature_dim}",
                        prop.feature.len()
                    ),
                });
            }
            let [x1, y1, x2, y2] = prop.bbox;
            boxes.push(BoxF::new(x1, y1, x2, y2));
            features.push(prop.feature.clone());
        }

        let mut image_labels = vec![false; num_classes];
        for &label in &line.labels {
            image_labels[label - 1] = true;
        }
        let ground_truth = line.gt.as_ref().map(|gt| GroundTruth {
            instances: gt
                .iter()
                .map(|inst| {
                    if inst.difficult.is_some() {
                        warnings.push(format!(
                            "line {line_no}: `difficult` flag is not modeled and was ignored"
                        ));
                    }
                    let [x1, y1, x2, y2] = inst.bbox;
                    GtInstance {
                        bbox: BoxF::new(x1, y1, x2, y2),
                        class_id: inst.class,
                    }
                })
                .collect(),
        });

        let num_proposals = boxes.len();
        let proposals = ProposalSet {
            image_id: line.image_id.clone(),
            boxes,
            features,
            scores: ProposalSet::zero_scores(num_proposals, num_classes),
            image_labels,
        };
        for violation in validate_proposal_set(&proposals) {
            match violation {
                // eval-only dumps may legitimately lack labels
                Violation::NoActiveLabels => {
                    warnings.push(format!("line {line_no}: {violation}"));
                }
                other => {
                    return Err(DatasetError::Invalid {
                        line: *line_no,
                        message: other.to_string(),
                    })
                }
            }
        }
        if let Some(gt) = &ground_truth {
            for (gi, inst) in gt.instances.iter().enumerate() {
                if !inst.bbox.is_valid() {
                    return Err(DatasetError::Invalid {
                        line: *line_no,
                        message: format!("gt instance {gi} has a degenerate box"),
                    });
                }
            }
        }
        records.push(ImageRecord {
            width: line.width,
            height: line.height,
            proposals,
            ground_truth,
        });
    }

    Ok(LoadReport {
        dataset: Dataset {
            records,
            num_classes,
            feature_dim,
        },
        warnings,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadReport, DatasetError> {
    let text = fs::read_to_string(path)?;
    parse_dataset_str(&text)
}

fn record_to_line(record: &ImageRecord) -> DatasetLine {
    DatasetLine {
        image_id: record.proposals.image_id.clone(),
        width: record.width,
        height: record.height,
        labels: record.proposals.active_classes().collect(),
        proposals: record
            .proposals
            .boxes
            .iter()
            .zip(&record.proposals.features)
            .map(|(b, f)| ProposalLine {
                bbox: [b.x1, b.y1, b.x2, b.y2],
                feature: f.clone(),
            })
            .collect(),
        gt: record.ground_truth.as_ref().map(|gt| {
            gt.instances
                .iter()
                .map(|inst| GtLine {
                    bbox: [inst.bbox.x1, inst.bbox.y1, inst.bbox.x2, inst.bbox.y2],
                    class: inst.class_id,
                    difficult: None,
                })
                .collect()
        }),
    }
}

/// Serializes the dataset as JSON Lines; byte-deterministic for a given
/// dataset.
pub fn write_dataset<W: Write>(mut out: W, dataset: &Dataset) -> std::io::Result<()> {
    for record in &dataset.records {
        let line = serde_json::to_string(&record_to_line(record))
            .expect("dataset records serialize cleanly");
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> std::io::Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, dataset)?;
    fs::write(path, buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn empty_file_is_an_empty_dataset_with_warning() {
        let report = parse_dataset_str("").unwrap();
        assert!(report.dataset.is_empty());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn round_trip_preserves_the_synth_dataset() {
        let ds = generate(&SynthConfig {
            num_images: 4,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let report = parse_dataset_str(&text).unwrap();
        assert_eq!(report.dataset, ds);
        // byte-identical on a second pass
        let mut buf2 = Vec::new();
        write_dataset(&mut buf2, &report.dataset).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn feature_length_mismatch_names_the_line() {
        let text = concat!(
            r#"{"image_id":"a","width":10,"height":10,"labels":[1],"proposals":[{"box":[0,0,5,5],"feature":[1,2]}]}"#,
            "\n",
            r#"{"image_id":"b","width":10,"height":10,"labels":[1],"proposals":[{"box":[0,0,5,5],"feature":[1,2,3]}]}"#,
        );
        match parse_dataset_str(text) {
            Err(DatasetError::Invalid { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_names_the_line() {
        let text = "\n{not json}\n";
        match parse_dataset_str(text) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let text = r#"{"image_id":"a","width":10,"height":10,"labels":[1],"proposals":[{"box":[5,0,5,5],"feature":[1]}]}"#;
        assert!(matches!(
            parse_dataset_str(text),
            Err(DatasetError::Invalid { line: 1, .. })
        ));
    }

    #[test]
    fn difficult_flag_is_ignored_with_warning() {
        let text = r#"{"image_id":"a","width":10,"height":10,"labels":[1],"proposals":[{"box":[0,0,5,5],"feature":[1]}],"gt":[{"box":[0,0,5,5],"class":1,"difficult":true}]}"#;
        let report = parse_dataset_str(text).unwrap();
        assert_eq!(report.dataset.records[0].ground_truth.as_ref().unwrap().instances.len(), 1);
        assert!(report.warnings.iter().any(|w| w.contains("difficult")));
    }

    #[test]
    fn oversized_class_ids_are_rejected() {
        let text = r#"{"image_id":"a","width":10,"height":10,"labels":[4096],"proposals":[{"box":[0,0,5,5],"feature":[1]}]}"#;
        assert!(matches!(
            parse_dataset_str(text),
            Err(DatasetError::Invalid { line: 1, .. })
        ));
    }

    #[test]
    fn label_free_record_warns_but_loads() {
        let text = r#"{"image_id":"a","width":10,"height":10,"labels":[],"proposals":[{"box":[0,0,5,5],"feature":[1]}],"gt":[{"box":[0,0,5,5],"class":1}]}"#;
        let report = parse_dataset_str(text).unwrap();
        assert_eq!(report.dataset.records.len(), 1);
        assert!(!report.warnings.is_empty());
    }
}
