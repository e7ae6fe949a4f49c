//! Deterministic synthetic scenes: the desk-scale stand-in for a real
//! dataset with region proposals and CNN features.
//!
//! Each image places non-overlapping ground-truth boxes for a few classes,
//! then emits jittered proposals per object across IoU strata (~0.9, 0.7,
//! 0.5, 0.3) plus one small "part" proposal, and a handful of background
//! boxes. Features are class prototypes plus bounded noise whose radius
//! grows as box quality drops, so better-aligned boxes look cleaner in
//! feature space. Part proposals are blended toward a class-correlated
//! offset direction: the locally distinctive region that image-level
//! training tends to overrate. Everything is a pure function of the seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::geometry::iou;
use crate::model::{
    BoxF, Dataset, GroundTruth, GtInstance, ImageRecord, ProposalSet,
};

/// IoU targets of the jittered proposals emitted per object.
pub const IOU_STRATA: [f64; 4] = [0.9, 0.7, 0.5, 0.3];

/// Fraction of the object area covered by the part proposal.
pub const PART_AREA_FRACTION: f64 = 0.35;



#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_images: usize,
    pub canvas_width: f64,
    pub canvas_height: f64,
    /// Number of foreground classes `C`.
    pub num_classes: usize,
    /// Most classes an image can contain.
    pub max_active_classes: usize,
    /// Weight of instance count `i + 1` per active class; zero entries
    /// disable that count.
    pub instance_count_weights: Vec<f64>,
    pub feature_dim: usize,
    /// Scale of the class prototype vectors; pairwise prototype distance
    /// is `sqrt(2)` times this.
    pub prototype_separation: f64,
    /// Noise radius bound for well-aligned object proposals.
    pub feature_noise: f64,
    /// Strength in `[0, 1]` of the part-feature offset; 0 removes the
    /// confounder entirely.
    pub part_confound_strength: f64,
    /// Prototype fraction carried by a proposal that barely covers its
    /// object; a perfectly aligned box carries the full prototype.
    /// Coverage-scaled class evidence lets well-aligned boxes outrank
    /// part boxes.
    pub coverage_signal_floor: f64,
    /// Radius of the per-image, per-class appearance offset shared by all
    /// of that class's object proposals in one image (scene-level pose     /// and lighting variation). Instances within an image stay equidistant,
    /// so mining is unaffected.
    pub instance_appearance_spread: f64,
    /// Jittered proposals per ground-truth object (the part proposal is
    /// emitted on top of these).
    pub proposals_per_object: usize,
    pub background_proposals: usize,
    /// GT side lengths are drawn uniformly from this range.
    pub object_side_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_images: 100,
            canvas_width: 512.0,
            canvas_height: 512.0,
            num_classes: 3,
            max_active_classes: 2,
            // 2..4 instances per active class
            instance_count_weights: vec![0.0, 0.4, 0.4, 0.2],
            feature_dim: 16,
            prototype_separation: 8.0,
            feature_noise: 0.5,
            part_confound_strength: 0.8,
            coverage_signal_floor: 0.6,
            instance_appearance_spread: 2.5,
            proposals_per_object: 12,
            background_proposals: 10,
            object_side_range: (40.0, 80.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("canvas too small to place the requested instances (image {image_index})")]
    CanvasTooSmall { image_index: usize },
}

impl SynthConfig {
    /// Strength of the class prototype in a proposal covering its object
    /// at `iou_with_gt`.
    pub fn coverage_signal(&self, iou_with_gt: f64) -> f64 {
        self.coverage_signal_floor + (1.0 - self.coverage_signal_floor) * iou_with_gt
    }

    fn validate(&self) -> Result<(), SynthError> {
        let err = |msg: &str| Err(SynthError::InvalidConfig(msg.to_string()));
        if self.num_images == 0 {
            return err("num_images must be positive");
        }
        if self.num_classes == 0 {
            return err("num_classes must be positive");
        }
        if self.max_active_classes == 0 {
            return err("max_active_classes must be positive");
        }
        if self.feature_dim < 2 * self.num_classes + 1 {
            return err("feature_dim must be at least 2 * num_classes + 1");
        }
        if self.instance_count_weights.is_empty()
            || self.instance_count_weights.iter().all(|&w| w <= 0.0)
        {
            return err("instance_count_weights needs a positive entry");
        }
        if self.instance_count_weights.iter().any(|&w| w < 0.0) {
            return err("instance_count_weights must be nonnegative");
        }
        if self.feature_noise < 0.0 {
            return err("feature_noise must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.part_confound_strength) {
            return err("part_confound_strength must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.coverage_signal_floor) {
            return err("coverage_signal_floor must be in [0, 1]");
        }
        if self.instance_appearance_spread < 0.0 {
            return err("instance_appearance_spread must be nonnegative");
        }
        if self.proposals_per_object == 0 {
            return err("proposals_per_object must be positive");
        }
        let (lo, hi) = self.object_side_range;
        if !(lo > 0.0 && hi >= lo) {
            return err("object_side_range must be an increasing positive range");
        }
        Ok(())
    }

    /// Prototype of foreground class `c` (1-based): one axis per class.
    pub fn class_prototype(&self, class_id: usize) -> Vec<f64> {
        let mut proto = vec![0.0; self.feature_dim];
        proto[class_id - 1] = self.prototype_separation;
        proto
    }

    /// Offset direction of the discriminative part of class `c`; disjoint
    /// from every class prototype axis.
    pub fn part_direction(&self, class_id: usize) -> Vec<f64> {
        let mut dir = vec![0.0; self.feature_dim];
        dir[self.num_classes + class_id - 1] = self.prototype_separation;
        dir
    }
}

/// Vector drawn uniformly from the ball of radius `radius`: the noise is
/// bounded, which keeps nearest-prototype classification exact whenever
/// the radius stays below half the prototype distance.
fn ball_noise(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return vec![0.0; dim];
    }
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    let r = radius * rng.random_range(0.0..1.0f64).powf(1.0 / dim as f64);
    for v in &mut dir {
        *v *= r / norm;
    }
    dir
}

fn add(mut base: Vec<f64>, extra: &[f64], scale: f64) -> Vec<f64> {
    for (b, e) in base.iter_mut().zip(extra) {
        *b += scale * e;
    }
    base
}

/// Noise radius for an object proposal at overlap `iou_with_gt`: cleaner
/// boxes get tighter features.
fn noise_radius(base: f64, iou_with_gt: f64) -> f64 {
    base * (1.5 - iou_with_gt)
}



fn weighted_count(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if pick < w {
            return i + 1;
        }
        pick -= w;
    }
    weights.len()
}

/// Translate a copy of `bbox` so the copy's IoU with it is exactly
/// `target` (pure translation along one axis keeps the algebra closed
/// form). All jitters of one object share an axis and sign, which keeps
/// every same-object pair above the 0.3 suppression threshold: one box
/// per object survives class-wise suppression.
fn jittered_box(bbox: &BoxF, target: f64, horizontal: bool, sign: f64) -> BoxF {
    let extent = if horizontal { bbox.width() } else { bbox.height() };
    let shift = sign * extent * (1.0 - target) / (1.0 + target);
    if horizontal {
        bbox.translated(shift, 0.0)
    } else {
        bbox.translated(0.0, shift)
    }
}

fn part_box(bbox: &BoxF, rng: &mut ChaCha8Rng) -> BoxF {
    let scale = PART_AREA_FRACTION.sqrt();
    let w = bbox.width() * scale;
    let h = bbox.height() * scale;
    let x = bbox.x1 + rng.random_range(0.0..1.0) * (bbox.width() - w);
    let y = bbox.y1 + rng.random_range(0.0..1.0) * (bbox.height() - h);
    BoxF::new(x, y, x + w, y + h)
}

struct PlacedObject {
    bbox: BoxF,
    class_id: usize,
}

fn generate_image(cfg: &SynthConfig, image_index: usize) -> Result<ImageRecord, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, image_index as u64));
    let (side_lo, side_hi) = cfg.object_side_range;
    // margin keeps every jittered proposal on the canvas (max shift is
    // (1 - 0.3) / (1 + 0.3) of a side, for the loosest stratum)
    let margin = side_hi * 0.6;

    // active classes: partial shuffle of 1..=C
    let mut class_pool: Vec<usize> = (1..=cfg.num_classes).collect();
    for i in 0..class_pool.len() {
        let j = rng.random_range(i..class_pool.len());
        class_pool.swap(i, j);
    }
    let active = rng.random_range(1..=cfg.max_active_classes.min(cfg.num_classes));
    let mut classes: Vec<usize> = class_pool[..active].to_vec();
    classes.sort_unstable();

    // scene-level appearance offset per active class
    let mut class_offsets: Vec<Vec<f64>> = vec![Vec::new(); cfg.num_classes + 1];
    for &class_id in &classes {
        class_offsets[class_id] = ball_noise(
            &mut rng,
            cfg.feature_dim,
            cfg.instance_appearance_spread,
        );
    }

    // place disjoint ground-truth boxes
    let mut objects: Vec<PlacedObject> = Vec::new();
    for &class_id in &classes {
        let count = weighted_count(&cfg.instance_count_weights, &mut rng);
        for _ in 0..count {
            let mut placed = false;
            for _attempt in 0..500 {
                let w = rng.random_range(side_lo..=side_hi);
                let h = rng.random_range(side_lo..=side_hi);
                let max_x = cfg.canvas_width - margin - w;
                let max_y = cfg.canvas_height - margin - h;
                if max_x <= margin || max_y <= margin {
                    break;
                }
                let x = rng.random_range(margin..max_x);
                let y = rng.random_range(margin..max_y);
                let candidate = BoxF::new(x, y, x + w, y + h);
                if objects.iter().all(|o| iou(&o.bbox, &candidate) == 0.0) {
                    objects.push(PlacedObject {
                        bbox: candidate,
                        class_id,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(SynthError::CanvasTooSmall { image_index });
            }
        }
    }

    // emit proposals
    let mut boxes = Vec::new();
    let mut features = Vec::new();
    for obj in &objects {
        let proto = cfg.class_prototype(obj.class_id);
        let horizontal = rng.random_range(0..2) == 0;
        let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
        for s in 0..cfg.proposals_per_object {
            let target = IOU_STRATA[s % IOU_STRATA.len()] + rng.random_range(-0.05..0.05);
            let prop = jittered_box(&obj.bbox, target, horizontal, sign);
            let actual = iou(&prop, &obj.bbox);
            let radius = noise_radius(cfg.feature_noise, actual);
            let mut feat: Vec<f64> = proto.iter().map(|v| v * cfg.coverage_signal(actual)).collect();
            feat = add(feat, &class_offsets[obj.class_id], 1.0);
            feat = add(feat, &ball_noise(&mut rng, cfg.feature_dim, radius), 1.0);
            boxes.push(prop);
            features.push(feat);
        }
        // the discriminative part: a small sub-box whose features trade
        // whole-object evidence for the class-correlated part offset
        let part = part_box(&obj.bbox, &mut rng);
        let part_iou = iou(&part, &obj.bbox);
        let radius = noise_radius(cfg.feature_noise, part_iou);
        let mut feat: Vec<f64> = proto.iter().map(|v| v * cfg.coverage_signal(part_iou)).collect();
        feat = add(feat, &class_offsets[obj.class_id], 1.0);
        feat = add(
            feat,
            &cfg.part_direction(obj.class_id),
            cfg.part_confound_strength,
        );
        feat = add(feat, &ball_noise(&mut rng, cfg.feature_dim, radius), 1.0);
        boxes.push(part);
        features.push(feat);
    }
    for _ in 0..cfg.background_proposals {
        let mut best: Option<(f64, BoxF)> = None;
        for _attempt in 0..100 {
            let w = rng.random_range(side_lo..=side_hi);
            let h = rng.random_range(side_lo..=side_hi);
            let x = rng.random_range(0.0..cfg.canvas_width - w);
            let y = rng.random_range(0.0..cfg.canvas_height - h);
            let candidate = BoxF::new(x, y, x + w, y + h);
            let worst = objects
                .iter()
                .map(|o| iou(&o.bbox, &candidate))
                .fold(0.0, f64::max);
            if best.as_ref().is_none_or(|(b, _)| worst < *b) {
                best = Some((worst, candidate));
            }
            if worst < 0.15 {
                break;
            }
        }
        let (_, bbox) = best.expect("at least one background attempt");
        boxes.push(bbox);
        features.push(ball_noise(&mut rng, cfg.feature_dim, cfg.feature_noise));
    }

    let num_proposals = boxes.len();
    let mut image_labels = vec![false; cfg.num_classes];
    for &c in &classes {
        image_labels[c - 1] = true;
    }
    Ok(ImageRecord {
        width: cfg.canvas_width,
        height: cfg.canvas_height,
        proposals: ProposalSet {
            image_id: format!("synth_{image_index:06}"),
            boxes,
            features,
            scores: ProposalSet::zero_scores(num_proposals, cfg.num_classes),
            image_labels,
        },
        ground_truth: Some(GroundTruth {
            instances: objects
                .iter()
                .map(|o| GtInstance {
                    bbox: o.bbox,
                    class_id: o.class_id,
                })
                .collect(),
        }),
    })
}

/// Generates the full dataset; per-image work is independent and seeded
/// separately, so the output does not depend on thread count.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let records: Result<Vec<ImageRecord>, SynthError> = (0..cfg.num_images)
        .into_par_iter()
        .map(|i| generate_image(cfg, i))
        .collect();
    Ok(Dataset {
        records: records?,
        num_classes: cfg.num_classes,
        feature_dim: cfg.feature_dim,
    })
}

/// Perfect-classifier scores from ground truth: the foreground column `c`
/// of proposal `j` is its best IoU with an instance of class `c`, and the
/// background column is one minus the best foreground score. `None`
/// without ground truth.
pub fn oracle_scores(record: &ImageRecord) -> Option<Vec<Vec<f64>>> {
    let gt = record.ground_truth.as_ref()?;
    let num_classes = record.proposals.num_classes();
    let scores = record
        .proposals
        .boxes
        .iter()
        .map(|bbox| {
            let mut row = vec![0.0; num_classes + 1];
            for inst in &gt.instances {
                let overlap = iou(bbox, &inst.bbox);
                if overlap > row[inst.class_id] {
                    row[inst.class_id] = overlap;
                }
            }
            row[0] = 1.0 - row.iter().skip(1).cloned().fold(0.0, f64::max);
            row
        })
        .collect();
    Some(scores)
}

/// Copy of the dataset with every record's scores replaced by
/// [`oracle_scores`]; records without ground truth keep their scores.
pub fn with_oracle_scores(dataset: &Dataset) -> Dataset {
    let records = dataset
        .records
        .iter()
        .map(|r| match oracle_scores(r) {
            Some(scores) => ImageRecord {
                proposals: r.proposals.with_scores(scores),
                ..r.clone()
            },
            None => r.clone(),
        })
        .collect();
    Dataset {
        records,
        ..dataset.clone()
    }
}
