//! Exact rectangle geometry: area overlap, intersection-over-union, and
//! class-wise greedy non-maximum suppression.

use crate::model::{BoxF, ProposalSet};

/// Overlap area of two boxes, 0 when they are disjoint.
pub fn intersection_area(a: &BoxF, b: &BoxF) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    iw * ih
}

/// Intersection over union in `[0, 1]`.
///
/// Degenerate boxes (zero or negative area, non-finite coordinates) have
/// IoU 0 with everything, including themselves; strict validation of
/// inputs is the caller's concern (`validate_proposal_set` reports them).
pub fn iou(a: &BoxF, b: &BoxF) -> f64 {
    if !a.is_valid() || !b.is_valid() {
        return 0.0;
    }
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited in descending score order (ties: lower original index
/// first); a box is suppressed when its IoU with an already-kept box is
/// strictly greater than `iou_threshold`. Returns kept indices in visit
/// order, i.e. sorted by descending score.
pub fn nms(boxes: &[BoxF], scores: &[f64], iou_threshold: f64) -> Vec<usize> {
    assert_eq!(
        boxes.len(),
        scores.len(),
        "nms needs one score per box ({} boxes, {} scores)",
        boxes.len(),
        scores.len()
    );
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::new();
    'candidates: for &i in &order {
        for &k in &kept {
            if iou(&boxes[k], &boxes[i]) > iou_threshold {
                continue 'candidates;
            }
        }
        kept.push(i);
    }
    kept
}

/// Indices of the `k` highest scores of `class_id`, descending, ties by
/// lower index. Returns all indices when the set has fewer than `k`
/// proposals.
pub fn top_k_by_score(ps: &ProposalSet, class_id: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| {
        ps.score(b, class_id)
            .total_cmp(&ps.score(a, class_id))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}
