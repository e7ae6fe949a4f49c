//! Shared value types: boxes, proposal sets, mining graphs, pseudo-labels,
//! and ground truth. Everything here is an immutable value object after
//! construction and safe to share across threads.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in continuous image coordinates.
///
/// Corners are `(x1, y1)`–`(x2, y2)` with `area = (x2 - x1) * (y2 - y1)`.
/// A box is valid when both extents are strictly positive and all
/// coordinates are finite; degenerate boxes are tolerated by the geometry
/// routines (they have IoU 0 with everything) and reported by
/// [`validate_proposal_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxF {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoxF {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.x1.is_finite()
            && self.y1.is_finite()
            && self.x2.is_finite()
            && self.y2.is_finite()
            && self.x2 > self.x1
            && self.y2 > self.y1
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BoxF {
        BoxF::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Half-open containment test: `x1 <= x < x2`, `y1 <= y < y2`.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }
}

/// Per-image collection of `N` proposals: boxes, feature vectors, and a
/// `N x (C + 1)` score matrix where column 0 is the background class and
/// columns `1..=C` are foreground classes.
///
/// `image_labels[c - 1]` says whether foreground class `c` is present in
/// the image. Scores are zero-initialized on load and filled in by a
/// detection head or by the oracle scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    pub image_id: String,
    pub boxes: Vec<BoxF>,
    pub features: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub image_labels: Vec<bool>,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Number of foreground classes `C`.
    pub fn num_classes(&self) -> usize {
        self.image_labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Score of `proposal` for `class_id`, where class 0 is background.
    pub fn score(&self, proposal: usize, class_id: usize) -> f64 {
        self.scores[proposal][class_id]
    }

    pub fn is_class_active(&self, class_id: usize) -> bool {
        class_id >= 1 && class_id <= self.num_classes() && self.image_labels[class_id - 1]
    }

    /// Foreground class ids (`1..=C`) present in the image, ascending.
    pub fn active_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.image_labels
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i + 1)
    }

    /// Same proposals with a replacement score matrix.
    pub fn with_scores(&self, scores: Vec<Vec<f64>>) -> ProposalSet {
        ProposalSet {
            scores,
            ..self.clone()
        }
    }

    /// Uniform all-zero score matrix sized `N x (C + 1)`.
    pub fn zero_scores(num_proposals: usize, num_classes: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; num_classes + 1]; num_proposals]
    }
}

/// Edge of a star-shaped spatial graph: a non-core node together with its
/// IoU to the graph center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialEdge {
    pub node: usize,
    pub iou: f64,
}

/// Star graph linking a center proposal to every proposal whose IoU with
/// it exceeds the mining threshold `T`. `nodes[0]` is the center; the
/// remaining nodes are in ascending index order and `edges` aligns with
/// `nodes[1..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGraph {
    pub core_index: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<SpatialEdge>,
}

impl SpatialGraph {
    /// Graph containing only its center.
    pub fn singleton(core_index: usize) -> Self {
        Self {
            core_index,
            nodes: vec![core_index],
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.nodes.contains(&index)
    }
}

/// Edge of an appearance graph: a mined node with its feature distance to
/// the class core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppearanceEdge {
    pub node: usize,
    pub distance: f64,
}

/// Per-class mining result: the core proposal, the mined instance nodes
/// (pairwise non-overlapping, ascending feature distance after the core),
/// the average core-graph distance used for the gate, and one spatial
/// graph per node (aligned with `nodes`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceGraph {
    pub class_id: usize,
    pub core_index: usize,
    pub nodes: Vec<usize>,
    pub edges: Vec<AppearanceEdge>,
    pub d_avg: f64,
    pub spatial_graphs: Vec<SpatialGraph>,
}

impl AppearanceGraph {
    pub fn spatial_graph_of(&self, node: usize) -> Option<&SpatialGraph> {
        self.nodes
            .iter()
            .position(|&n| n == node)
            .map(|i| &self.spatial_graphs[i])
    }
}

/// Supervision assigned to one proposal by mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalLabel {
    /// Assigned class, 0 for background.
    pub class_id: usize,
    /// Loss weight in `[0, 1]`.
    pub weight: f64,
    /// True when the proposal is the center of the spatial graph that owns it.
    pub is_core: bool,
    /// Center of the owning spatial graph, or the closest core for
    /// background proposals that overlap one; `None` otherwise.
    pub owner_core: Option<usize>,
}

impl ProposalLabel {
    pub fn background() -> Self {
        Self {
            class_id: 0,
            weight: 1.0,
            is_core: false,
            owner_core: None,
        }
    }
}

/// Per-proposal class assignments and loss weights for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub labels: Vec<ProposalLabel>,
}

impl PseudoLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One annotated object instance. Evaluation-only: mining and training
/// never read ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub bbox: BoxF,
    pub class_id: usize,
}

/// Annotated instances of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub instances: Vec<GtInstance>,
}

/// One image of a dataset: canvas size, proposals, and optional ground
/// truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub width: f64,
    pub height: f64,
    pub proposals: ProposalSet,
    pub ground_truth: Option<GroundTruth>,
}

/// A full dataset with its global class count and feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<ImageRecord>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_ground_truth(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.ground_truth.is_some())
    }

    /// Violations across all records, tagged with the record index.
    pub fn validate(&self) -> Vec<(usize, Violation)> {
        self.records
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                validate_proposal_set(&r.proposals)
                    .into_iter()
                    .map(move |v| (i, v))
            })
            .collect()
    }
}

/// A single invariant violation found by [`validate_proposal_set`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    EmptyProposalSet,
    DimensionMismatch { detail: String },
    DegenerateBox { proposal: usize },
    FeatureDimMismatch { proposal: usize, expected: usize, found: usize },
    NonFiniteFeature { proposal: usize },
    ScoreOutOfRange { proposal: usize, class_id: usize, value: f64 },
    NoActiveLabels,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyProposalSet => write!(f, "proposal set is empty"),
            Violation::DimensionMismatch { detail } => {
                write!(f, "dimension mismatch: {detail}")
            }
            Violation::DegenerateBox { proposal } => {
                write!(f, "degenerate box at proposal {proposal}")
            }
            Violation::FeatureDimMismatch {
                proposal,
                expected,
                found,
            } => write!(
                f,
                "feature length {found} at proposal {proposal}, expected {expected}"
            ),
            Violation::NonFiniteFeature { proposal } => {
                write!(f, "non-finite feature value at proposal {proposal}")
            }
            Violation::ScoreOutOfRange {
                proposal,
                class_id,
                value,
            } => write!(
                f,
                "score {value} out of [0, 1] at proposal {proposal}, class {class_id}"
            ),
            Violation::NoActiveLabels => write!(f, "image has no active class labels"),
        }
    }
}

/// Report-style invariant check; an empty result means the set is valid.
pub fn validate_proposal_set(ps: &ProposalSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = ps.boxes.len();
    if n == 0 {
        out.push(Violation::EmptyProposalSet);
    }
    if ps.features.len() != n {
        out.push(Violation::DimensionMismatch {
            detail: format!("{} boxes but {} features", n, ps.features.len()),
        });
    }
    if ps.scores.len() != n {
        out.push(Violation::DimensionMismatch {
            detail: format!("{} boxes but {} score rows", n, ps.scores.len()),
        });
    }
    for (i, b) in ps.boxes.iter().enumerate() {
        if !b.is_valid() {
            out.push(Violation::DegenerateBox { proposal: i });
        }
    }
    let d = ps.feature_dim();
    for (i, feat) in ps.features.iter().enumerate() {
        if feat.len() != d {
            out.push(Violation::FeatureDimMismatch {
                proposal: i,
                expected: d,
                found: feat.len(),
            });
        } else if feat.iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFiniteFeature { proposal: i });
        }
    }
    let width = ps.num_classes() + 1;
    for (i, row) in ps.scores.iter().enumerate() {
        if row.len() != width {
            out.push(Violation::DimensionMismatch {
                detail: format!(
                    "score row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    width
                ),
            });
            continue;
        }
        for (c, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::ScoreOutOfRange {
                    proposal: i,
                    class_id: c,
                    value: v,
                });
            }
        }
    }
    if !ps.image_labels.iter().any(|&on| on) {
        out.push(Violation::NoActiveLabels);
    }
    out
}
