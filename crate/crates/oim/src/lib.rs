//! Object instance mining for weakly supervised object detection.
//!
//! Detectors trained from image-level labels alone tend to latch onto the
//! single most discriminative region per class and miss every other
//! instance. This crate implements the counter-measure pipeline at desk
//! scale, over precomputed proposal features instead of a CNN backbone:
//!
//! - [`mining`] builds per-class spatial and appearance graphs around the
//!   top-scoring proposal and greedily mines all non-overlapping instances
//!   whose features pass a distance gate, turning them into pseudo-labels.
//! - [`head`] is a two-stream MIL detection head (classification and
//!   detection softmax streams) plus refinement classifiers trained with an
//!   instance-reweighted cross-entropy loss, with analytic gradients.
//! - [`trainer`] runs the deterministic SGD loop that alternates mining and
//!   refinement, with the two-phase distance-gate schedule and ablation
//!   switches.
//! - [`eval`] scores detections with VOC-style AP/mAP and CorLoc plus an
//!   instance-level mining recall diagnostic.
//! - [`synth`] generates seeded multi-instance scenes with proposals,
//!   features, and ground truth.
//! - [`io`] holds the JSONL dataset format, key=value configs, checkpoint
//!   codec, and PGM/SVG renderers; [`cli`] wires everything into the `oim`
//!   binary.

pub mod cli;
pub mod eval;
pub mod geometry;
pub mod head;
pub mod io;
pub mod mining;
pub mod model;
pub mod synth;
pub mod trainer;

pub use model::{
    AppearanceEdge, AppearanceGraph, BoxF, Dataset, GroundTruth, GtInstance, ImageRecord,
    ProposalLabel, ProposalSet, PseudoLabels, SpatialEdge, SpatialGraph, Violation,
};

/// Derives an independent stream seed from a base seed (splitmix64 step),
/// so per-image generators stay decorrelated and thread-order independent.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
