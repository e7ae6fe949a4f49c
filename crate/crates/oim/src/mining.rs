//! Per-class object instance mining.
//!
//! For every class present in an image, mining starts from the top-scoring
//! proposal (the core), collects the core's spatial graph (proposals that
//! overlap it beyond a threshold `T`), and derives the average core-to-node
//! feature distance `D_avg`. It then walks all proposals in ascending
//! feature distance from the core and greedily admits those that pass the
//! `alpha * D_avg` distance gate and have zero overlap with every node
//! admitted so far. Each admitted node gets its own spatial graph, and the
//! union of those graphs is converted into per-proposal pseudo-labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::iou;
use crate::model::{
    AppearanceEdge, AppearanceGraph, ProposalLabel, ProposalSet, PseudoLabels, SpatialEdge,
    SpatialGraph,
};

/// Knobs of the mining pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Spatial-graph IoU threshold `T`; membership requires IoU strictly
    /// greater than this.
    pub iou_threshold: f64,
    /// Distance-gate multiplier on `D_avg`.
    pub alpha: f64,
    /// Whether the core's own zero distance counts into `D_avg`. The
    /// mining loop visits the core like any other proposal, so the literal
    /// reading includes it; the flag allows the alternative.
    pub include_core_in_davg: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            alpha: 5.0,
            include_core_in_davg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiningError {
    #[error("class {class_id} not active for image {image_id}")]
    ClassNotActive { image_id: String, class_id: usize },
    #[error("empty proposal set for image {image_id}")]
    EmptyProposalSet { image_id: String },
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Index of the top-scoring proposal for `class_id`, ties broken by the
/// lowest index.
pub fn select_core(ps: &ProposalSet, class_id: usize) -> Result<usize, MiningError> {
    if ps.is_empty() {
        return Err(MiningError::EmptyProposalSet {
            image_id: ps.image_id.clone(),
        });
    }
    if !ps.is_class_active(class_id) {
        return Err(MiningError::ClassNotActive {
            image_id: ps.image_id.clone(),
            class_id,
        });
    }
    let mut best = 0;
    for j in 1..ps.len() {
        if ps.score(j, class_id) > ps.score(best, class_id) {
            best = j;
        }
    }
    Ok(best)
}

/// Star graph of `center` plus every proposal whose IoU with it exceeds
/// `cfg.iou_threshold`.
pub fn build_spatial_graph(ps: &ProposalSet, center: usize, cfg: &MiningConfig) -> SpatialGraph {
    let mut nodes = vec![center];
    let mut edges = Vec::new();
    for j in 0..ps.len() {
        if j == center {
            continue;
        }
        let overlap = iou(&ps.boxes[center], &ps.boxes[j]);
        if overlap > cfg.iou_threshold {
            nodes.push(j);
            edges.push(SpatialEdge {
                node: j,
                iou: overlap,
            });
        }
    }
    SpatialGraph {
        core_index: center,
        nodes,
        edges,
    }
}

/// Euclidean distance between two feature vectors.
pub fn appearance_distance(a: &[f64], b: &[f64]) -> Result<f64, MiningError> {
    if a.len() != b.len() {
        return Err(MiningError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Mean feature distance from the core to the nodes of its spatial graph.
///
/// With `include_core_in_davg` the core contributes its own zero distance.
/// When the flag is off and the graph is a singleton there is nothing to
/// average; the result is 0, which closes the distance gate.
pub fn average_graph_distance(
    ps: &ProposalSet,
    core_graph: &SpatialGraph,
    cfg: &MiningConfig,
) -> f64 {
    let core = core_graph.core_index;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &node in &core_graph.nodes {
        if node == core && !cfg.include_core_in_davg {
            continue;
        }
        sum += appearance_distance(&ps.features[core], &ps.features[node])
            .expect("features of one proposal set share a dimension");
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Full per-class mining pass.
///
/// The core is always `nodes[0]`. A proposal `j` is admitted as a further
/// node iff its feature distance to the core is strictly below
/// `alpha * D_avg` and it has IoU exactly 0 with every node admitted
/// before it; candidates are visited in ascending distance (ties by lower
/// index), so the result is deterministic. A singleton core graph yields
/// `D_avg = 0` and therefore no extra nodes.
pub fn mine_instances(
    ps: &ProposalSet,
    class_id: usize,
    cfg: &MiningConfig,
) -> Result<AppearanceGraph, MiningError> {
    let core = select_core(ps, class_id)?;
    let core_graph = build_spatial_graph(ps, core, cfg);
    let d_avg = average_graph_distance(ps, &core_graph, cfg);

    let core_feature = &ps.features[core];
    let mut distances = Vec::with_capacity(ps.len());
    for feat in &ps.features {
        distances.push(appearance_distance(core_feature, feat)?);
    }
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));

    let gate = cfg.alpha * d_avg;
    let mut nodes = vec![core];
    let mut edges = Vec::new();
    for &j in &order {
        if j == core {
            continue;
        }
        if distances[j] >= gate {
            // ascending order: every later candidate fails the gate too
            break;
        }
        let overlaps_selected = nodes
            .iter()
            .any(|&k| iou(&ps.boxes[k], &ps.boxes[j]) > 0.0);
        if overlaps_selected {
            continue;
        }
        nodes.push(j);
        edges.push(AppearanceEdge {
            node: j,
            distance: distances[j],
        });
    }

    let spatial_graphs = nodes
        .iter()
        .map(|&n| {
            if n == core {
                core_graph.clone()
            } else {
                build_spatial_graph(ps, n, cfg)
            }
        })
        .collect();

    Ok(AppearanceGraph {
        class_id,
        core_index: core,
        nodes,
        edges,
        d_avg,
        spatial_graphs,
    })
}

/// One appearance graph per active class, ascending class id. Classes are
/// mined independently. An image without active classes yields an empty
/// list.
pub fn mine_all(ps: &ProposalSet, cfg: &MiningConfig) -> Vec<AppearanceGraph> {
    if ps.is_empty() {
        return Vec::new();
    }
    ps.active_classes()
        .map(|class_id| {
            mine_instances(ps, class_id, cfg)
                .expect("active class on a validated proposal set mines cleanly")
        })
        .collect()
}

/// Flattens mining results into per-proposal supervision.
///
/// Every proposal inside some mined spatial graph takes that graph's class
/// with the graph center's score as its loss weight; when several graphs
/// claim a proposal (possible across classes), the center with the larger
/// IoU wins, ties by lower class id and then lower center index. All other
/// proposals are background, weighted by the score of the
/// maximally-overlapping center, or 1.0 when no center overlaps them at
/// all.
pub fn assign_pseudo_labels(ps: &ProposalSet, graphs: &[AppearanceGraph]) -> PseudoLabels {
    // (class, center, member graph) triples in deterministic order
    let mut centers: Vec<(usize, usize, &SpatialGraph)> = Vec::new();
    for g in graphs {
        for (&node, sg) in g.nodes.iter().zip(&g.spatial_graphs) {
            centers.push((g.class_id, node, sg));
        }
    }

    let mut labels = vec![ProposalLabel::background(); ps.len()];
    for (j, label) in labels.iter_mut().enumerate() {
        // best owning graph for proposal j
        let mut owner: Option<(f64, usize, usize)> = None; // (iou, class, center)
        for &(class_id, center, sg) in &centers {
            if !sg.contains(j) {
                continue;
            }
            let overlap = iou(&ps.boxes[j], &ps.boxes[center]);
            let candidate = (overlap, class_id, center);
            owner = Some(match owner {
                None => candidate,
                Some(best) => {
                    if overlap > best.0
                        || (overlap == best.0 && class_id < best.1)
                        || (overlap == best.0 && class_id == best.1 && center < best.2)
                    {
                        candidate
                    } else {
                        best
                    }
                }
            });
        }
        if let Some((_, class_id, center)) = owner {
            *label = ProposalLabel {
                class_id,
                weight: ps.score(center, class_id),
                is_core: j == center,
                owner_core: Some(center),
            };
        } else {
            // background: weight comes from the closest center, if any
            let mut best: Option<(f64, usize, usize)> = None;
            for &(class_id, center, _) in &centers {
                let overlap = iou(&ps.boxes[j], &ps.boxes[center]);
                if overlap <= 0.0 {
                    continue;
                }
                let candidate = (overlap, class_id, center);
                best = Some(match best {
                    None => candidate,
                    Some(prev) => {
                        if overlap > prev.0
                            || (overlap == prev.0 && class_id < prev.1)
                            || (overlap == prev.0 && class_id == prev.1 && center < prev.2)
                        {
                            candidate
                        } else {
                            prev
                        }
                    }
                });
            }
            *label = match best {
                Some((_, class_id, center)) => ProposalLabel {
                    class_id: 0,
                    weight: ps.score(center, class_id),
                    is_core: false,
                    owner_core: Some(center),
                },
                None => ProposalLabel::background(),
            };
        }
    }
    PseudoLabels { labels }
}
