//! VOC-style detection metrics: per-class average precision and mAP
//! (eleven-point or area-under-curve interpolation), CorLoc, and an
//! instance-level mining recall diagnostic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::iou;
use crate::model::{AppearanceGraph, BoxF, Dataset, GtInstance};

/// One scored detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: usize,
    pub bbox: BoxF,
    pub score: f64,
}

/// Precision interpolation convention for average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApMode {
    /// Mean of the max precision at the 11 recall points 0.0, 0.1, .., 1.0.
    ElevenPoint,
    /// Area under the interpolated precision envelope.
    Area,
}

fn gt_of_class(dataset: &Dataset, class_id: usize) -> BTreeMap<&str, Vec<&GtInstance>> {
    let mut map: BTreeMap<&str, Vec<&GtInstance>> = BTreeMap::new();
    for record in &dataset.records {
        if let Some(gt) = &record.ground_truth {
            let of_class: Vec<&GtInstance> = gt
                .instances
                .iter()
                .filter(|g| g.class_id == class_id)
                .collect();
            if !of_class.is_empty() {
                map.insert(record.proposals.image_id.as_str(), of_class);
            }
        }
    }
    map
}

/// Ranks detections of one class by descending score (stable, so equal
/// scores keep input order) and greedily matches each against the not-yet
/// matched ground truth of the same image; a match needs IoU at or above
/// `iou_match`. Returns the per-rank true/false positive flags and the
/// number of ground-truth instances.
fn match_detections(
    detections: &[&Detection],
    gt: &BTreeMap<&str, Vec<&GtInstance>>,
    iou_match: f64,
) -> (Vec<bool>, usize) {
    let total_gt: usize = gt.values().map(Vec::len).sum();
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score).then(a.cmp(&b)));

    let mut used: BTreeMap<&str, Vec<bool>> = gt
        .iter()
        .map(|(&id, v)| (id, vec![false; v.len()]))
        .collect();
    let mut flags = Vec::with_capacity(order.len());
    for &i in &order {
        let det = detections[i];
        let mut best: Option<(f64, usize)> = None;
        if let Some(instances) = gt.get(det.image_id.as_str()) {
            for (g, inst) in instances.iter().enumerate() {
                let overlap = iou(&det.bbox, &inst.bbox);
                if overlap >= iou_match && best.is_none_or(|(b, _)| overlap > b) {
                    best = Some((overlap, g));
                }
            }
        }
        match best {
            Some((_, g)) if !used.get_mut(det.image_id.as_str()).unwrap()[g] => {
                used.get_mut(det.image_id.as_str()).unwrap()[g] = true;
                flags.push(true);
            }
            _ => flags.push(false), // miss or duplicate on an already-matched instance
        }
    }
    (flags, total_gt)
}

fn ap_from_flags(flags: &[bool], total_gt: usize, mode: ApMode) -> f64 {
    if total_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(flags.len()); // (recall, precision)
    for (rank, &hit) in flags.iter().enumerate() {
        if hit {
            tp += 1;
        }
        points.push((tp as f64 / total_gt as f64, tp as f64 / (rank + 1) as f64));
    }
    match mode {
        ApMode::ElevenPoint => {
            let mut total = 0.0;
            for step in 0..=10 {
                let r = step as f64 / 10.0;
                let best = points
                    .iter()
                    .filter(|(recall, _)| *recall >= r)
                    .map(|(_, precision)| *precision)
                    .fold(0.0, f64::max);
                total += best;
            }
            total / 11.0
        }
        ApMode::Area => {
            // precision envelope integrated over recall
            let mut envelope = points.clone();
            let mut best = 0.0f64;
            for p in envelope.iter_mut().rev() {
                best = best.max(p.1);
                p.1 = best;
            }
            let mut area = 0.0;
            let mut prev_recall = 0.0;
            for (recall, precision) in envelope {
                if recall > prev_recall {
                    area += (recall - prev_recall) * precision;
                    prev_recall = recall;
                }
            }
            area
        }
    }
}

/// Average precision for one class, or `None` when the dataset has no
/// ground-truth instance of that class (such classes are excluded from the
/// mAP mean).
pub fn average_precision(
    detections: &[Detection],
    dataset: &Dataset,
    class_id: usize,
    iou_match: f64,
    mode: ApMode,
) -> Option<f64> {
    let gt = gt_of_class(dataset, class_id);
    let total_gt: usize = gt.values().map(Vec::len).sum();
    if total_gt == 0 {
        return None;
    }
    let of_class: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.class_id == class_id)
        .collect();
    let (flags, total) = match_detections(&of_class, &gt, iou_match);
    Some(ap_from_flags(&flags, total, mode))
}

/// Per-class APs plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub per_class: BTreeMap<usize, f64>,
    pub map: f64,
}

/// Mean of the defined per-class APs at the standard 0.5 IoU match.
pub fn mean_average_precision(
    detections: &[Detection],
    dataset: &Dataset,
    iou_match: f64,
    mode: ApMode,
) -> MapReport {
    let mut per_class = BTreeMap::new();
    for class_id in 1..=dataset.num_classes {
        if let Some(ap) = average_precision(detections, dataset, class_id, iou_match, mode) {
            per_class.insert(class_id, ap);
        }
    }
    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    MapReport { per_class, map }
}

/// Per-class correct-localization fractions plus the fraction over all
/// (image, class) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorLocReport {
    pub per_class: BTreeMap<usize, f64>,
    pub overall: f64,
}

/// Correct localization: over the images that contain a class, the
/// fraction whose single top-scoring detection of that class reaches
/// `iou_match` with some ground-truth instance of it. Images without a
/// detection of the class count as incorrect.
pub fn corloc(detections: &[Detection], dataset: &Dataset, iou_match: f64) -> CorLocReport {
    let mut per_class = BTreeMap::new();
    let mut correct_pairs = 0usize;
    let mut total_pairs = 0usize;
    for class_id in 1..=dataset.num_classes {
        let gt = gt_of_class(dataset, class_id);
        if gt.is_empty() {
            continue;
        }
        let mut correct = 0usize;
        for (&image_id, instances) in &gt {
            let top = detections
                .iter()
                .filter(|d| d.class_id == class_id && d.image_id == image_id)
                .max_by(|a, b| a.score.total_cmp(&b.score));
            if let Some(det) = top {
                let hit = instances
                    .iter()
                    .any(|inst| iou(&det.bbox, &inst.bbox) >= iou_match);
                if hit {
                    correct += 1;
                }
            }
        }
        per_class.insert(class_id, correct as f64 / gt.len() as f64);
        correct_pairs += correct;
        total_pairs += gt.len();
    }
    let overall = if total_pairs == 0 {
        0.0
    } else {
        correct_pairs as f64 / total_pairs as f64
    };
    CorLocReport { per_class, overall }
}

/// Fraction of ground-truth instances covered by a mined appearance-graph
/// node box of the correct class at `iou_match`, under greedy one-to-one
/// matching (largest overlaps first). `graphs` pairs each image id with
/// its mining result.
pub fn instance_recall(
    graphs: &[(String, Vec<AppearanceGraph>)],
    dataset: &Dataset,
    iou_match: f64,
) -> f64 {
    let mut total_gt = 0usize;
    let mut matched = 0usize;
    for record in &dataset.records {
        let Some(gt) = &record.ground_truth else {
            continue;
        };
        total_gt += gt.instances.len();
        let Some((_, image_graphs)) = graphs
            .iter()
            .find(|(id, _)| *id == record.proposals.image_id)
        else {
            continue;
        };
        // candidate (gt, node) pairs above the threshold, same class
        let mut candidates: Vec<(f64, usize, usize, usize)> = Vec::new(); // (iou, gt, graph, node)
        for (gi, inst) in gt.instances.iter().enumerate() {
            for (graph_idx, graph) in image_graphs.iter().enumerate() {
                if graph.class_id != inst.class_id {
                    continue;
                }
                for (ni, &node) in graph.nodes.iter().enumerate() {
                    let overlap = iou(&inst.bbox, &record.proposals.boxes[node]);
                    if overlap >= iou_match {
                        candidates.push((overlap, gi, graph_idx, ni));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let mut gt_used = vec![false; gt.instances.len()];
        let mut node_used: Vec<(usize, usize)> = Vec::new();
        for (_, gi, graph_idx, ni) in candidates {
            if gt_used[gi] || node_used.contains(&(graph_idx, ni)) {
                continue;
            }
            gt_used[gi] = true;
            node_used.push((graph_idx, ni));
            matched += 1;
        }
    }
    if total_gt == 0 {
        0.0
    } else {
        matched as f64 / total_gt as f64
    }
}
