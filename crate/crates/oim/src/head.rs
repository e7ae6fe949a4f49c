//! The trainable model: a two-stream MIL pooling detection head plus a
//! stack of refinement classifiers, with the image-level cross-entropy
//! loss, the instance-reweighted refinement loss, and analytic gradients
//! for all of it.
//!
//! The head is linear over supplied feature vectors. The classification
//! stream softmaxes over classes per proposal, the detection stream over
//! proposals per class; their elementwise product gives proposal scores
//! and its column sums give image scores. Each refinement head is an
//! independent `(C + 1)`-way classifier over the same features.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::PseudoLabels;

/// Probability clamp applied before logarithms and to pooled image scores.
pub const SCORE_EPSILON: f64 = 1e-7;

/// Dense affine map, `out = weight * x + bias`, weight stored row-major
/// `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn seeded(in_dim: usize, out_dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in &mut layer.weight {
            *w = rng.random_range(-scale..scale);
        }
        layer
    }

    pub fn forward_one(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *slot = acc;
        }
    }

    /// Logits for a batch of feature rows: `N x out_dim`.
    pub fn logits(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|f| {
                let mut row = vec![0.0; self.out_dim];
                self.forward_one(f, &mut row);
                row
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Gradient buffer with the same shape as a [`Linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearGrads {
    pub fn zeros_like(layer: &Linear) -> Self {
        Self {
            weight: vec![0.0; layer.weight.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &LinearGrads) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    /// Accumulates `dL/dlogits` (shape `N x out_dim`) against `features`.
    fn accumulate(&mut self, layer: &Linear, features: &[Vec<f64>], dlogits: &[Vec<f64>]) {
        for (f, drow) in features.iter().zip(dlogits) {
            for (o, &g) in drow.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut self.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, v) in row.iter_mut().zip(f) {
                    *w += g * v;
                }
                self.bias[o] += g;
            }
        }
    }
}

/// Parameters of the detection head: the two MIL streams and `K`
/// refinement classifiers (each `(C + 1)`-way including background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidModel {
    pub classification: Linear,
    pub detection: Linear,
    pub refine: Vec<Linear>,
}

impl MidModel {
    /// Seeded random initialization: uniform weights, zero biases.
    pub fn new(feature_dim: usize, num_classes: usize, refine_heads: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.1;
        Self {
            classification: Linear::seeded(feature_dim, num_classes, scale, &mut rng),
            detection: Linear::seeded(feature_dim, num_classes, scale, &mut rng),
            refine: (0..refine_heads)
                .map(|_| Linear::seeded(feature_dim, num_classes + 1, scale, &mut rng))
                .collect(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.classification.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.classification.out_dim
    }

    pub fn refine_heads(&self) -> usize {
        self.refine.len()
    }

    pub fn is_finite(&self) -> bool {
        self.classification.is_finite()
            && self.detection.is_finite()
            && self.refine.iter().all(Linear::is_finite)
    }
}

/// Loss shaping for the refinement heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Reweighting strength `beta` in `[0, 1)`.
    pub beta: f64,
    /// When false the loss reduces to the plain weighted cross entropy.
    pub enable_reweighting: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            enable_reweighting: true,
        }
    }
}

/// Output of the two-stream head.
#[derive(Debug, Clone, PartialEq)]
pub struct MidOutput {
    /// `N x C` per-proposal scores (product of the two streams).
    pub proposal_scores: Vec<Vec<f64>>,
    /// `C` pooled image scores, clamped into `(0, 1)`.
    pub image_scores: Vec<f64>,
}

fn softmax_rows(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logits
        .iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        })
        .collect()
}

fn softmax_columns(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = logits.len();
    let width = logits.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; width]; n];
    for c in 0..width {
        let max = logits
            .iter()
            .map(|row| row[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for row in logits {
            sum += (row[c] - max).exp();
        }
        for (j, row) in logits.iter().enumerate() {
            out[j][c] = (row[c] - max).exp() / sum;
        }
    }
    out
}

/// Two-stream forward pass: classification softmax per proposal times
/// detection softmax per class, pooled into image scores by summing over
/// proposals.
pub fn mid_forward(model: &MidModel, features: &[Vec<f64>]) -> MidOutput {
    let cls = softmax_rows(&model.classification.logits(features));
    let det = softmax_columns(&model.detection.logits(features));
    let num_classes = model.num_classes();
    let proposal_scores: Vec<Vec<f64>> = cls
        .iter()
        .zip(&det)
        .map(|(u, v)| (0..num_classes).map(|c| u[c] * v[c]).collect())
        .collect();
    let image_scores = (0..num_classes)
        .map(|c| {
            let s: f64 = proposal_scores.iter().map(|row| row[c]).sum();
            s.clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
        })
        .collect();
    MidOutput {
        proposal_scores,
        image_scores,
    }
}

/// Class-probability rows of refinement head `k` (1-based): per-proposal
/// softmax over `C + 1` classes.
pub fn refine_forward(model: &MidModel, head: usize, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
    assert!(
        head >= 1 && head <= model.refine_heads(),
        "refinement head {head} out of range 1..={}",
        model.refine_heads()
    );
    softmax_rows(&model.refine[head - 1].logits(features))
}

/// Multi-label image classification loss:
/// `-sum_c [y_c log s_c + (1 - y_c) log(1 - s_c)]`.
pub fn image_classification_loss(image_scores: &[f64], image_labels: &[bool]) -> f64 {
    assert_eq!(image_scores.len(), image_labels.len());
    let mut loss = 0.0;
    for (&s, &y) in image_scores.iter().zip(image_labels) {
        let s = s.clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON);
        loss -= if y { s.ln() } else { (1.0 - s).ln() };
    }
    loss
}

/// Balance term of the reweighted loss: `beta` for surrounding proposals,
/// `beta - 1` for a graph center, so the loss multipliers `(1 + z)` come
/// out as `1 + beta` and `beta`.
pub fn oir_weight(is_core: bool, cfg: &LossConfig) -> f64 {
    if is_core {
        cfg.beta - 1.0
    } else {
        cfg.beta
    }
}

fn loss_multiplier(label: &crate::model::ProposalLabel, cfg: &LossConfig) -> f64 {
    if cfg.enable_reweighting {
        1.0 + oir_weight(label.is_core, cfg)
    } else {
        1.0
    }
}

/// Instance-reweighted refinement loss over per-proposal probability rows:
/// `-(1/N) sum_j w_j (1 + z_j) log p_j[class(j)]`, with `z_j` dropped when
/// reweighting is disabled.
pub fn refinement_loss(probs: &[Vec<f64>], labels: &PseudoLabels, cfg: &LossConfig) -> f64 {
    assert_eq!(probs.len(), labels.len());
    let n = probs.len() as f64;
    let mut loss = 0.0;
    for (row, label) in probs.iter().zip(&labels.labels) {
        let p = row[label.class_id].clamp(SCORE_EPSILON, 1.0);
        loss -= label.weight * loss_multiplier(label, cfg) * p.ln();
    }
    loss / n
}

/// Analytic gradient of [`refinement_loss`] with respect to the logits
/// feeding the per-proposal softmax. Row `j` is
/// `(w_j (1 + z_j) / N) * (softmax(logits_j) - onehot(class(j)))`.
pub fn refinement_loss_grad(
    logits: &[Vec<f64>],
    labels: &PseudoLabels,
    cfg: &LossConfig,
) -> Vec<Vec<f64>> {
    assert_eq!(logits.len(), labels.len());
    let probs = softmax_rows(logits);
    let n = logits.len() as f64;
    probs
        .into_iter()
        .zip(&labels.labels)
        .map(|(mut row, label)| {
            let scale = label.weight * loss_multiplier(label, cfg) / n;
            row[label.class_id] -= 1.0;
            for v in &mut row {
                *v *= scale;
            }
            row
        })
        .collect()
}

/// Gradients of the two MIL streams.
#[derive(Debug, Clone, PartialEq)]
pub struct MidGrads {
    pub classification: LinearGrads,
    pub detection: LinearGrads,
}

impl MidGrads {
    pub fn zeros_like(model: &MidModel) -> Self {
        Self {
            classification: LinearGrads::zeros_like(&model.classification),
            detection: LinearGrads::zeros_like(&model.detection),
        }
    }

    pub fn add_assign(&mut self, other: &MidGrads) {
        self.classification.add_assign(&other.classification);
        self.detection.add_assign(&other.detection);
    }
}

/// Image classification loss plus its gradients with respect to both
/// stream parameters.
pub fn mid_loss_and_grads(
    model: &MidModel,
    features: &[Vec<f64>],
    image_labels: &[bool],
) -> (f64, MidOutput, MidGrads) {
    let num_classes = model.num_classes();
    let cls_logits = model.classification.logits(features);
    let det_logits = model.detection.logits(features);
    let cls = softmax_rows(&cls_logits);
    let det = softmax_columns(&det_logits);

    let proposal_scores: Vec<Vec<f64>> = cls
        .iter()
        .zip(&det)
        .map(|(u, v)| (0..num_classes).map(|c| u[c] * v[c]).collect())
        .collect();
    let image_scores: Vec<f64> = (0..num_classes)
        .map(|c| {
            let s: f64 = proposal_scores.iter().map(|row| row[c]).sum();
            s.clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
        })
        .collect();
    let loss = image_classification_loss(&image_scores, image_labels);

    // dL/ds_c, then fan out over the product of the two softmax streams
    let dscore: Vec<f64> = image_scores
        .iter()
        .zip(image_labels)
        .map(|(&s, &y)| if y { -1.0 / s } else { 1.0 / (1.0 - s) })
        .collect();

    let n = features.len();
    let mut dcls_logits = vec![vec![0.0; num_classes]; n];
    for j in 0..n {
        // row-softmax Jacobian
        let du: Vec<f64> = (0..num_classes).map(|c| dscore[c] * det[j][c]).collect();
        let dot: f64 = (0..num_classes).map(|c| du[c] * cls[j][c]).sum();
        for c in 0..num_classes {
            dcls_logits[j][c] = cls[j][c] * (du[c] - dot);
        }
    }
    let mut ddet_logits = vec![vec![0.0; num_classes]; n];
    for c in 0..num_classes {
        // column-softmax Jacobian
        let dv: Vec<f64> = (0..n).map(|j| dscore[c] * cls[j][c]).collect();
        let dot: f64 = (0..n).map(|j| dv[j] * det[j][c]).sum();
        for j in 0..n {
            ddet_logits[j][c] = det[j][c] * (dv[j] - dot);
        }
    }

    let mut grads = MidGrads::zeros_like(model);
    grads
        .classification
        .accumulate(&model.classification, features, &dcls_logits);
    grads
        .detection
        .accumulate(&model.detection, features, &ddet_logits);

    (
        loss,
        MidOutput {
            proposal_scores,
            image_scores,
        },
        grads,
    )
}

/// Refinement loss of head `k` plus its probability rows and parameter
/// gradients.
pub fn refine_loss_and_grads(
    model: &MidModel,
    head: usize,
    features: &[Vec<f64>],
    labels: &PseudoLabels,
    cfg: &LossConfig,
) -> (f64, Vec<Vec<f64>>, LinearGrads) {
    assert!(head >= 1 && head <= model.refine_heads());
    let layer = &model.refine[head - 1];
    let logits = layer.logits(features);
    let probs = softmax_rows(&logits);
    let loss = refinement_loss(&probs, labels, cfg);
    let dlogits = refinement_loss_grad(&logits, labels, cfg);
    let mut grads = LinearGrads::zeros_like(layer);
    grads.accumulate(layer, features, &dlogits);
    (loss, probs, grads)
}
