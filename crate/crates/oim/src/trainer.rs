//! Deterministic training loop: the two-stream head learns the image
//! classification loss while each refinement head is supervised by
//! pseudo-labels mined from its predecessor's scores (the two-stream head
//! feeds the first). The distance-gate multiplier alpha and the learning
//! rate each switch once at a configured fraction of the run. Ablation
//! switches select how much of the mining machinery is active and whether
//! the refinement loss is instance-reweighted.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::eval::{corloc, instance_recall, mean_average_precision, ApMode, Detection};
use crate::geometry::{nms, top_k_by_score};
use crate::head::{
    mid_loss_and_grads, refine_forward, refine_loss_and_grads, LinearGrads, LossConfig, MidGrads,
    MidModel,
};
use crate::mining::{mine_instances, MiningConfig, MiningError};
use crate::model::{AppearanceGraph, Dataset, ImageRecord, ProposalSet, SpatialGraph};

/// Which parts of the pipeline an ablation row enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Core proposal only, plain refinement loss.
    Baseline,
    /// Core plus its spatial graph, plain loss.
    SgOnly,
    /// Appearance mining with singleton spatial graphs, plain loss.
    AgOnly,
    /// Full mining (spatial + appearance graphs), plain loss.
    Oim,
    /// Spatial-graph labels with the instance-reweighted loss.
    IrOnly,
    /// Full mining with the instance-reweighted loss.
    OimIr,
}

impl AblationMode {
    pub fn all() -> [AblationMode; 6] {
        [
            AblationMode::Baseline,
            AblationMode::SgOnly,
            AblationMode::AgOnly,
            AblationMode::Oim,
            AblationMode::IrOnly,
            AblationMode::OimIr,
        ]
    }

    /// Whether appearance-graph mining runs at all.
    pub fn mines_appearance(self) -> bool {
        matches!(
            self,
            AblationMode::AgOnly | AblationMode::Oim | AblationMode::OimIr
        )
    }

    /// Whether spatial neighbors of each mined node are labeled too.
    pub fn expands_spatial(self) -> bool {
        matches!(
            self,
            AblationMode::SgOnly | AblationMode::IrOnly | AblationMode::Oim | AblationMode::OimIr
        )
    }

    /// Whether the refinement loss reweights cores and surroundings.
    pub fn reweights(self) -> bool {
        matches!(self, AblationMode::IrOnly | AblationMode::OimIr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Baseline => "baseline",
            AblationMode::SgOnly => "sg_only",
            AblationMode::AgOnly => "ag_only",
            AblationMode::Oim => "oim",
            AblationMode::IrOnly => "ir_only",
            AblationMode::OimIr => "oim_ir",
        }
    }
}

impl std::str::FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationMode::all()
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown ablation mode `{s}` (expected one of: {})",
                    AblationMode::all().map(|m| m.as_str()).join(", ")
                )
            })
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_iterations: usize,
    pub batch_size: usize,
    /// Learning rate before and after the switch fraction.
    pub learning_rate_initial: f64,
    pub learning_rate_final: f64,
    /// Fraction of the run after which the learning rate drops.
    pub lr_switch_fraction: f64,
    /// Distance-gate multiplier before and after its switch fraction.
    pub alpha_initial: f64,
    pub alpha_final: f64,
    pub alpha_switch_fraction: f64,
    /// Spatial-graph IoU threshold `T`.
    pub iou_threshold: f64,
    pub beta: f64,
    pub include_core_in_davg: bool,
    /// Number of refinement heads `K`.
    pub refine_heads: usize,
    pub seed: u64,
    pub ablation: AblationMode,
    /// Radius of optional per-step feature noise augmentation; 0 disables.
    pub feature_noise: f64,
    /// Trace record cadence in iterations.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 2600,
            batch_size: 8,
            learning_rate_initial: 0.01,
            learning_rate_final: 0.001,
            lr_switch_fraction: 4.0 / 9.0,
            alpha_initial: 5.0,
            alpha_final: 2.0,
            alpha_switch_fraction: 7.0 / 9.0,
            iou_threshold: 0.5,
            beta: 0.2,
            include_core_in_davg: true,
            refine_heads: 3,
            seed: 0,
            ablation: AblationMode::OimIr,
            feature_noise: 0.0,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("non-finite loss at iteration {iteration} on image {image_id} ({head})")]
    NonFiniteLoss {
        iteration: usize,
        image_id: String,
        head: String,
    },
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.batch_size == 0 {
            return err("batch_size must be positive");
        }
        if self.learning_rate_initial <= 0.0 || self.learning_rate_final <= 0.0 {
            return err("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.lr_switch_fraction)
            || !(0.0..1.0).contains(&self.alpha_switch_fraction)
        {
            return err("switch fractions must lie in (0, 1)");
        }
        if self.alpha_initial <= 0.0 || self.alpha_final <= 0.0 {
            return err("alpha values must be positive");
        }
        if !(0.0..1.0).contains(&self.iou_threshold) {
            return err("iou_threshold must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return err("beta must lie in [0, 1)");
        }
        if self.refine_heads == 0 || self.refine_heads > 5 {
            return err("refine_heads must lie in 1..=5");
        }
        if self.log_every == 0 {
            return err("log_every must be positive");
        }
        if self.feature_noise < 0.0 {
            return err("feature_noise must be nonnegative");
        }
        Ok(())
    }

    /// Distance-gate multiplier in force at `iteration`.
    pub fn alpha_at(&self, iteration: usize) -> f64 {
        let switch = (self.total_iterations as f64 * self.alpha_switch_fraction).floor() as usize;
        if iteration < switch {
            self.alpha_initial
        } else {
            self.alpha_final
        }
    }

    /// Learning rate in force at `iteration`.
    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        let switch = (self.total_iterations as f64 * self.lr_switch_fraction).floor() as usize;
        if iteration < switch {
            self.learning_rate_initial
        } else {
            self.learning_rate_final
        }
    }

    fn mining_config_at(&self, iteration: usize) -> MiningConfig {
        MiningConfig {
            iou_threshold: self.iou_threshold,
            alpha: self.alpha_at(iteration),
            include_core_in_davg: self.include_core_in_davg,
        }
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig {
            beta: self.beta,
            enable_reweighting: self.ablation.reweights(),
        }
    }
}

/// Mining restricted by an ablation mode. The full pipeline is plain
/// `mine_instances`; the reduced modes strip appearance nodes, spatial
/// expansion, or both, while the appearance gate (when active) still uses
/// the core's true spatial graph for its distance average.
pub fn mine_for_mode(
    ps: &ProposalSet,
    class_id: usize,
    cfg: &MiningConfig,
    mode: AblationMode,
) -> Result<AppearanceGraph, MiningError> {
    let mut graph = if mode.mines_appearance() {
        mine_instances(ps, class_id, cfg)?
    } else {
        let core = crate::mining::select_core(ps, class_id)?;
        let core_graph = crate::mining::build_spatial_graph(ps, core, cfg);
        let d_avg = crate::mining::average_graph_distance(ps, &core_graph, cfg);
        AppearanceGraph {
            class_id,
            core_index: core,
            nodes: vec![core],
            edges: Vec::new(),
            d_avg,
            spatial_graphs: vec![core_graph],
        }
    };
    if !mode.expands_spatial() {
        for sg in &mut graph.spatial_graphs {
            *sg = SpatialGraph::singleton(sg.core_index);
        }
    }
    Ok(graph)
}

/// [`mine_for_mode`] over every active class of the image.
pub fn mine_all_for_mode(
    ps: &ProposalSet,
    cfg: &MiningConfig,
    mode: AblationMode,
) -> Vec<AppearanceGraph> {
    if ps.is_empty() {
        return Vec::new();
    }
    ps.active_classes()
        .map(|class_id| {
            mine_for_mode(ps, class_id, cfg, mode)
                .expect("active class on a validated proposal set mines cleanly")
        })
        .collect()
}

/// One logged step of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    /// Image classification loss, mean over the batch.
    pub loss_image: f64,
    /// Per-head refinement losses, mean over the batch.
    pub loss_refine: Vec<f64>,
    /// Appearance nodes mined for the last head, mean per batch image.
    pub mined_instances_per_image: f64,
    /// Mining recall against ground truth over the batch, when available.
    pub instance_recall: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub records: Vec<TraceRecord>,
}

struct ImageStep {
    loss_image: f64,
    loss_refine: Vec<f64>,
    mid_grads: MidGrads,
    refine_grads: Vec<LinearGrads>,
    mined_nodes: usize,
    last_graphs: Vec<AppearanceGraph>,
    bad_head: Option<String>,
}

/// Pads `N x C` proposal scores with a zero background column into the
/// `N x (C + 1)` layout mining expects.
fn pad_background(proposal_scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
    proposal_scores
        .iter()
        .map(|row| {
            let mut padded = Vec::with_capacity(row.len() + 1);
            padded.push(0.0);
            padded.extend_from_slice(row);
            padded
        })
        .collect()
}

fn step_image(
    model: &MidModel,
    record: &ImageRecord,
    mining_cfg: &MiningConfig,
    loss_cfg: &LossConfig,
    mode: AblationMode,
    noise_seed: Option<u64>,
    noise_radius: f64,
) -> ImageStep {
    let ps = &record.proposals;
    let features: Vec<Vec<f64>> = match noise_seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ps.features
                .iter()
                .map(|f| {
                    f.iter()
                        .map(|&v| v + rng.random_range(-noise_radius..noise_radius))
                        .collect()
                })
                .collect()
        }
        None => ps.features.clone(),
    };

    let (loss_image, mid_out, mid_grads) =
        mid_loss_and_grads(model, &features, &ps.image_labels);
    let mut bad_head = None;
    if !loss_image.is_finite() {
        bad_head = Some("image head".to_string());
    }

    let mut prev_scores = pad_background(&mid_out.proposal_scores);
    let mut loss_refine = Vec::with_capacity(model.refine_heads());
    let mut refine_grads = Vec::with_capacity(model.refine_heads());
    let mut mined_nodes = 0;
    let mut last_graphs = Vec::new();
    for k in 1..=model.refine_heads() {
        let ps_step = ps.with_scores(prev_scores.clone());
        let graphs = mine_all_for_mode(&ps_step, mining_cfg, mode);
        let labels = crate::mining::assign_pseudo_labels(&ps_step, &graphs);
        let (loss_k, probs, grads_k) =
            refine_loss_and_grads(model, k, &features, &labels, loss_cfg);
        if !loss_k.is_finite() && bad_head.is_none() {
            bad_head = Some(format!("refinement head {k}"));
        }
        loss_refine.push(loss_k);
        refine_grads.push(grads_k);
        prev_scores = probs;
        if k == model.refine_heads() {
            mined_nodes = graphs.iter().map(|g| g.nodes.len()).sum();
            last_graphs = graphs;
        }
    }

    ImageStep {
        loss_image,
        loss_refine,
        mid_grads,
        refine_grads,
        mined_nodes,
        last_graphs,
        bad_head,
    }
}

fn apply_sgd(layer_param: &mut [f64], grads: &[f64], scale: f64) {
    for (p, g) in layer_param.iter_mut().zip(grads) {
        *p -= scale * g;
    }
}

/// Runs the training loop. Deterministic given `(dataset, cfg)`: the model
/// init, the batch order, and any augmentation noise all derive from
/// `cfg.seed`, and per-image gradients are reduced in input order.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(MidModel, EpochTrace), TrainError> {
    cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(TrainError::InvalidDataset("dataset is empty".into()));
    }
    let violations = dataset.validate();
    if let Some((index, violation)) = violations.first() {
        return Err(TrainError::InvalidDataset(format!(
            "record {index}: {violation}"
        )));
    }

    let mut model = MidModel::new(
        dataset.feature_dim,
        dataset.num_classes,
        cfg.refine_heads,
        derive_seed(cfg.seed, 0x11),
    );
    let mut trace = EpochTrace::default();
    let loss_cfg = cfg.loss_config();

    let n = dataset.records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x22));
    let mut cursor = n; // forces a shuffle on first use

    for iteration in 0..cfg.total_iterations {
        let mining_cfg = cfg.mining_config_at(iteration);
        let lr = cfg.learning_rate_at(iteration);

        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor >= n {
                for i in 0..n {
                    let j = order_rng.random_range(i..n);
                    order.swap(i, j);
                }
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        let steps: Vec<ImageStep> = batch
            .par_iter()
            .map(|&idx| {
                let noise_seed = (cfg.feature_noise > 0.0).then(|| {
                    derive_seed(cfg.seed, 0x33 + iteration as u64 * n as u64 + idx as u64)
                });
                step_image(
                    &model,
                    &dataset.records[idx],
                    &mining_cfg,
                    &loss_cfg,
                    cfg.ablation,
                    noise_seed,
                    cfg.feature_noise,
                )
            })
            .collect();

        for (step, &idx) in steps.iter().zip(&batch) {
            if let Some(head) = &step.bad_head {
                return Err(TrainError::NonFiniteLoss {
                    iteration,
                    image_id: dataset.records[idx].proposals.image_id.clone(),
                    head: head.clone(),
                });
            }
        }

        // fixed-order reduction keeps updates identical across threads
        let scale = lr / batch.len() as f64;
        let mut mid_total = MidGrads::zeros_like(&model);
        let mut refine_total: Vec<LinearGrads> =
            model.refine.iter().map(LinearGrads::zeros_like).collect();
        for step in &steps {
            mid_total.add_assign(&step.mid_grads);
            for (total, g) in refine_total.iter_mut().zip(&step.refine_grads) {
                total.add_assign(g);
            }
        }
        apply_sgd(
            &mut model.classification.weight,
            &mid_total.classification.weight,
            scale,
        );
        apply_sgd(
            &mut model.classification.bias,
            &mid_total.classification.bias,
            scale,
        );
        apply_sgd(&mut model.detection.weight, &mid_total.detection.weight, scale);
        apply_sgd(&mut model.detection.bias, &mid_total.detection.bias, scale);
        for (layer, grads) in model.refine.iter_mut().zip(&refine_total) {
            apply_sgd(&mut layer.weight, &grads.weight, scale);
            apply_sgd(&mut layer.bias, &grads.bias, scale);
        }
        if !model.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                iteration,
                image_id: "<batch>".into(),
                head: "parameter update".into(),
            });
        }

        if iteration % cfg.log_every == 0 || iteration + 1 == cfg.total_iterations {
            let m = steps.len() as f64;
            let loss_image = steps.iter().map(|s| s.loss_image).sum::<f64>() / m;
            let loss_refine: Vec<f64> = (0..cfg.refine_heads)
                .map(|k| steps.iter().map(|s| s.loss_refine[k]).sum::<f64>() / m)
                .collect();
            let mined =
                steps.iter().map(|s| s.mined_nodes as f64).sum::<f64>() / m;
            let recall = {
                let batch_has_gt = batch
                    .iter()
                    .all(|&idx| dataset.records[idx].ground_truth.is_some());
                batch_has_gt.then(|| {
                    let graphs: Vec<(String, Vec<AppearanceGraph>)> = batch
                        .iter()
                        .zip(&steps)
                        .map(|(&idx, step)| {
                            (
                                dataset.records[idx].proposals.image_id.clone(),
                                step.last_graphs.clone(),
                            )
                        })
                        .collect();
                    let subset = Dataset {
                        records: batch
                            .iter()
                            .map(|&idx| dataset.records[idx].clone())
                            .collect(),
                        ..dataset.clone()
                    };
                    instance_recall(&graphs, &subset, 0.5)
                })
            };
            trace.records.push(TraceRecord {
                iteration,
                alpha: mining_cfg.alpha,
                learning_rate: lr,
                loss_image,
                loss_refine,
                mined_instances_per_image: mined,
                instance_recall: recall,
            });
        }
    }

    Ok((model, trace))
}

/// Detection extraction knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Top-scoring proposals kept per class before suppression.
    pub top_k: usize,
    pub nms_threshold: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            top_k: 100,
            nms_threshold: 0.3,
        }
    }
}

/// Model scores for one image: mean of the refinement heads' probability
/// rows, `N x (C + 1)`.
pub fn model_scores(model: &MidModel, record: &ImageRecord) -> Vec<Vec<f64>> {
    let features = &record.proposals.features;
    let n = features.len();
    let width = model.num_classes() + 1;
    let mut mean = vec![vec![0.0; width]; n];
    for k in 1..=model.refine_heads() {
        let probs = refine_forward(model, k, features);
        for (row, p) in mean.iter_mut().zip(probs) {
            for (slot, v) in row.iter_mut().zip(p) {
                *slot += v / model.refine_heads() as f64;
            }
        }
    }
    mean
}

/// Per-class top-k selection and suppression over the model's scores.
pub fn detect(model: &MidModel, dataset: &Dataset, cfg: &DetectConfig) -> Vec<Detection> {
    let per_image: Vec<Vec<Detection>> = dataset
        .records
        .par_iter()
        .map(|record| {
            let ps = record.proposals.with_scores(model_scores(model, record));
            let mut dets = Vec::new();
            for class_id in 1..=dataset.num_classes {
                let top = top_k_by_score(&ps, class_id, cfg.top_k);
                let boxes: Vec<_> = top.iter().map(|&j| ps.boxes[j]).collect();
                let scores: Vec<_> = top.iter().map(|&j| ps.score(j, class_id)).collect();
                for &kept in &nms(&boxes, &scores, cfg.nms_threshold) {
                    dets.push(Detection {
                        image_id: ps.image_id.clone(),
                        class_id,
                        bbox: boxes[kept],
                        score: scores[kept],
                    });
                }
            }
            dets
        })
        .collect();
    per_image.into_iter().flatten().collect()
}

/// Mining pass over a whole dataset with the model's own final scores,
/// for the instance-recall diagnostic.
pub fn mine_dataset_with_model(
    model: &MidModel,
    dataset: &Dataset,
    mining_cfg: &MiningConfig,
    mode: AblationMode,
) -> Vec<(String, Vec<AppearanceGraph>)> {
    dataset
        .records
        .par_iter()
        .map(|record| {
            let ps = record.proposals.with_scores(model_scores(model, record));
            (ps.image_id.clone(), mine_all_for_mode(&ps, mining_cfg, mode))
        })
        .collect()
}

/// Outcome of one (mode, seed) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub map: f64,
    pub corloc: f64,
    pub instance_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub outcomes: Vec<SeedOutcome>,
    pub median_map: f64,
    pub median_corloc: f64,
    pub median_instance_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Trains one model per (mode, seed), evaluates mAP, CorLoc, and mining
/// recall, and reports per-row medians. Requires ground truth.
pub fn ablation_suite(
    dataset: &Dataset,
    base_cfg: &TrainConfig,
    modes: &[AblationMode],
    seeds: &[u64],
) -> Result<AblationReport, TrainError> {
    if !dataset.has_ground_truth() {
        return Err(TrainError::InvalidDataset(
            "ablation needs ground truth on every record".into(),
        ));
    }
    if modes.is_empty() || seeds.is_empty() {
        return Err(TrainError::InvalidConfig(
            "ablation needs at least one mode and one seed".into(),
        ));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut outcomes = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                ablation: mode,
                ..base_cfg.clone()
            };
            let (model, _) = train(dataset, &cfg)?;
            let detections = detect(&model, dataset, &DetectConfig::default());
            let map = mean_average_precision(&detections, dataset, 0.5, ApMode::ElevenPoint).map;
            let loc = corloc(&detections, dataset, 0.5).overall;
            let final_mining = MiningConfig {
                iou_threshold: cfg.iou_threshold,
                alpha: cfg.alpha_final,
                include_core_in_davg: cfg.include_core_in_davg,
            };
            let graphs = mine_dataset_with_model(&model, dataset, &final_mining, mode);
            let recall = instance_recall(&graphs, dataset, 0.5);
            outcomes.push(SeedOutcome {
                seed,
                map,
                corloc: loc,
                instance_recall: recall,
            });
        }
        rows.push(AblationRow {
            mode,
            median_map: median(&outcomes.iter().map(|o| o.map).collect::<Vec<_>>()),
            median_corloc: median(&outcomes.iter().map(|o| o.corloc).collect::<Vec<_>>()),
            median_instance_recall: median(
                &outcomes.iter().map(|o| o.instance_recall).collect::<Vec<_>>(),
            ),
            outcomes,
        });
    }
    Ok(AblationReport { rows })
}
