//! Acceptance suite: every release-gating property in one place, each
//! printing a PASS/FAIL line. Oracles here are written from scratch so
//! they stay independent of the library paths they check.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oim::eval::{
    average_precision, corloc, instance_recall, mean_average_precision, ApMode, Detection,
};
use oim::geometry::{iou, nms};
use oim::head::{refinement_loss, refinement_loss_grad, LossConfig};
use oim::mining::{
    appearance_distance, average_graph_distance, build_spatial_graph, mine_all, mine_instances,
    MiningConfig,
};
use oim::model::{
    AppearanceGraph, BoxF, Dataset, GroundTruth, GtInstance, ImageRecord, ProposalLabel,
    ProposalSet, PseudoLabels,
};
use oim::synth::{generate, with_oracle_scores, SynthConfig};
use oim::trainer::{ablation_suite, mine_all_for_mode, AblationMode, TrainConfig};

fn criterion(name: &str, check: impl FnOnce() -> Result<(), String>) {
    match check() {
        Ok(()) => println!("[acceptance] {name}: PASS"),
        Err(msg) => {
            println!("[acceptance] {name}: FAIL - {msg}");
            panic!("acceptance criterion `{name}` failed: {msg}");
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- geometry

/// Exact rational IoU on integer-coordinate boxes: every intermediate fits
/// an i64, and the final division matches the f64 route bit for bit when
/// both operands are exactly representable.
fn rational_iou(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> f64 {
    let iw = (a.2.min(b.2) - a.0.max(b.0)).max(0);
    let ih = (a.3.min(b.3) - a.1.max(b.1)).max(0);
    let inter = iw * ih;
    if inter == 0 {
        return 0.0;
    }
    let area_a = (a.2 - a.0) * (a.3 - a.1);
    let area_b = (b.2 - b.0) * (b.3 - b.1);
    inter as f64 / (area_a + area_b - inter) as f64
}

/// Quadratic reference suppressor, written independently of the library:
/// walk boxes in priority order, discarding everything a surviving box
/// dominates.
fn reference_nms(boxes: &[BoxF], scores: &[f64], threshold: f64) -> Vec<usize> {
    let mut priority: Vec<usize> = (0..boxes.len()).collect();
    priority.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut dead = vec![false; boxes.len()];
    let mut kept = Vec::new();
    for (rank, &i) in priority.iter().enumerate() {
        if dead[i] {
            continue;
        }
        kept.push(i);
        for &j in &priority[rank + 1..] {
            if !dead[j] && iou(&boxes[i], &boxes[j]) > threshold {
                dead[j] = true;
            }
        }
    }
    kept
}

#[test]
fn geometry_oracle_equivalence() {
    criterion("geometry oracle equivalence (1000 random instances)", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..1000 {
            let n = rng.random_range(1..=50usize);
            let mut int_boxes = Vec::with_capacity(n);
            let mut boxes = Vec::with_capacity(n);
            let mut scores = Vec::with_capacity(n);
            for _ in 0..n {
                let x1 = rng.random_range(0..900i64);
                let y1 = rng.random_range(0..900i64);
                let w = rng.random_range(1..=120i64);
                let h = rng.random_range(1..=120i64);
                int_boxes.push((x1, y1, x1 + w, y1 + h));
                boxes.push(BoxF::new(
                    x1 as f64,
                    y1 as f64,
                    (x1 + w) as f64,
                    (y1 + h) as f64,
                ));
                scores.push(rng.random_range(0.0..1.0f64));
            }
            // exact IoU agreement on a sampled pair set
            for _ in 0..20 {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let fast = iou(&boxes[i], &boxes[j]);
                let exact = rational_iou(int_boxes[i], int_boxes[j]);
                ensure(
                    fast == exact,
                    format!("case {case}: iou {fast} != rational {exact}"),
                )?;
            }
            let threshold = rng.random_range(0.0..1.0f64);
            let kept = nms(&boxes, &scores, threshold);
            let expected = reference_nms(&boxes, &scores, threshold);
            ensure(
                kept == expected,
                format!("case {case}: nms {kept:?} != reference {expected:?}"),
            )?;
        }
        let elapsed = start.elapsed();
        ensure(
            elapsed.as_secs_f64() < 5.0,
            format!("took {elapsed:?}, budget 5 s"),
        )
    });
}

// ------------------------------------------------- feature-distance fixtures

#[test]
fn distance_fixtures_match_hand_computation() {
    criterion("appearance/average distance fixtures (1e-12 relative)", || {
        let rel = |got: f64, want: f64| (got - want).abs() <= 1e-12 * want.abs().max(1.0);

        let d = appearance_distance(&[0.0, 0.0], &[3.0, 4.0]).map_err(|e| e.to_string())?;
        ensure(rel(d, 5.0), format!("3-4-5 distance: {d}"))?;

        let a: [f64; 8] = [1.25, -0.5, 2.0, 0.75, -3.5, 0.125, 4.0, -1.0];
        let b: [f64; 8] = [0.25, 1.5, -2.0, 0.5, -1.25, 2.0, 0.0, 3.0];
        let mut acc = 0.0;
        for i in 0..8 {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        let want = acc.sqrt();
        let got = appearance_distance(&a, &b).map_err(|e| e.to_string())?;
        ensure(rel(got, want), format!("8-dim distance: {got} vs {want}"))?;

        // core graph with node distances {0, 1, 2}
        let ps = ProposalSet {
            image_id: "davg".into(),
            boxes: vec![
                BoxF::new(0.0, 0.0, 10.0, 10.0),
                BoxF::new(0.0, 0.0, 10.0, 9.0),
                BoxF::new(0.0, 1.0, 10.0, 10.0),
            ],
            features: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            scores: vec![vec![0.0, 0.9], vec![0.0, 0.5], vec![0.0, 0.5]],
            image_labels: vec![true],
        };
        let include = MiningConfig::default();
        let graph = build_spatial_graph(&ps, 0, &include);
        ensure(graph.nodes == vec![0, 1, 2], "core graph shape")?;
        let with_core = average_graph_distance(&ps, &graph, &include);
        ensure(rel(with_core, 1.0), format!("mean with core: {with_core}"))?;
        let exclude = MiningConfig {
            include_core_in_davg: false,
            ..Default::default()
        };
        let without_core = average_graph_distance(&ps, &graph, &exclude);
        ensure(
            rel(without_core, 1.5),
            format!("mean without core: {without_core}"),
        )
    });
}

// -------------------------------------------------------- mining hand trace

#[test]
fn mining_trace_fidelity() {
    criterion("mining hand-trace fidelity (gate and overlap branches)", || {
        // p0 core; p1, p2 overlap it at feature distances 1, 2 (gate
        // branch passes both, overlap branch rejects both); p3 disjoint at
        // 1.5 (mined); p4 disjoint at 2.5 (gate-rejected)
        let ps = ProposalSet {
            image_id: "trace".into(),
            boxes: vec![
                BoxF::new(0.0, 0.0, 10.0, 10.0),
                BoxF::new(0.0, 0.0, 10.0, 9.0),
                BoxF::new(0.0, 1.0, 10.0, 10.0),
                BoxF::new(100.0, 100.0, 110.0, 110.0),
                BoxF::new(200.0, 200.0, 210.0, 210.0),
            ],
            features: vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![2.0, 0.0],
                vec![1.5, 0.0],
                vec![2.5, 0.0],
            ],
            scores: vec![
                vec![0.0, 0.9],
                vec![0.0, 0.5],
                vec![0.0, 0.5],
                vec![0.0, 0.6],
                vec![0.0, 0.4],
            ],
            image_labels: vec![true],
        };
        let cfg = MiningConfig {
            alpha: 2.0,
            ..Default::default()
        };
        let g = mine_instances(&ps, 1, &cfg).map_err(|e| e.to_string())?;
        ensure(g.core_index == 0, format!("core {}", g.core_index))?;
        ensure((g.d_avg - 1.0).abs() < 1e-15, format!("d_avg {}", g.d_avg))?;
        ensure(g.nodes == vec![0, 3], format!("nodes {:?}", g.nodes))?;
        ensure(
            g.spatial_graphs[0].nodes == vec![0, 1, 2],
            format!("core graph {:?}", g.spatial_graphs[0].nodes),
        )?;
        ensure(
            g.spatial_graphs[1].nodes == vec![3],
            format!("mined-node graph {:?}", g.spatial_graphs[1].nodes),
        )?;
        // overlap-exclusion branch: p1 passed the gate (1 < 2) yet is absent
        ensure(!g.nodes.contains(&1), "overlap exclusion failed for p1")?;
        // gate branch: p4 fails 2.5 < 2
        ensure(!g.nodes.contains(&4), "distance gate failed for p4")
    });
}

// --------------------------------------------------------- alpha monotonicity

#[test]
fn alpha_monotonicity_over_synth_images() {
    criterion("alpha monotonicity over 200 synth images", || {
        let dataset = with_oracle_scores(
            &generate(&SynthConfig {
                seed: 99,
                num_images: 200,
                ..Default::default()
            })
            .map_err(|e| e.to_string())?,
        );
        let narrow = MiningConfig {
            alpha: 2.0,
            ..Default::default()
        };
        let wide = MiningConfig {
            alpha: 5.0,
            ..Default::default()
        };
        let mut violations = 0usize;
        for record in &dataset.records {
            let small = mine_all(&record.proposals, &narrow);
            let large = mine_all(&record.proposals, &wide);
            for (s, l) in small.iter().zip(&large) {
                if !s.nodes.iter().all(|n| l.nodes.contains(n)) {
                    violations += 1;
                }
            }
        }
        ensure(violations == 0, format!("{violations} subset violations"))
    });
}

// ------------------------------------------------- gradient scaling identity

fn random_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> PseudoLabels {
    PseudoLabels {
        labels: (0..n)
            .map(|_| ProposalLabel {
                class_id: rng.random_range(0..=classes),
                weight: rng.random_range(0.05..1.0),
                is_core: rng.random_range(0..2) == 1,
                owner_core: None,
            })
            .collect(),
    }
}

fn softmax_rows_local(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logits
        .iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        })
        .collect()
}

#[test]
fn gradient_scaling_identity() {
    criterion("gradient scaling identity and finite differences", || {
        let beta = 0.2;
        let reweighted = LossConfig {
            beta,
            enable_reweighting: true,
        };
        let plain = LossConfig {
            beta,
            enable_reweighting: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(31415);
        for fixture in 0..50 {
            let n = rng.random_range(1..=8usize);
            let classes = rng.random_range(1..=4usize);
            let logits: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..=classes)
                        .map(|_| rng.random_range(-3.0..3.0))
                        .collect()
                })
                .collect();
            let labels = random_labels(&mut rng, n, classes);

            // per-row multiplicative identity against the plain loss
            let grad_rw = refinement_loss_grad(&logits, &labels, &reweighted);
            let grad_plain = refinement_loss_grad(&logits, &labels, &plain);
            for j in 0..n {
                let factor = if labels.labels[j].is_core {
                    beta
                } else {
                    1.0 + beta
                };
                for c in 0..=classes {
                    let want = factor * grad_plain[j][c];
                    let got = grad_rw[j][c];
                    ensure(
                        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                        format!("fixture {fixture} row {j} class {c}: {got} vs {want}"),
                    )?;
                }
            }

            // analytic vs central finite differences through the softmax
            let loss_at = |l: &[Vec<f64>]| {
                refinement_loss(&softmax_rows_local(l), &labels, &reweighted)
            };
            let step = 1e-6;
            for j in 0..n {
                for c in 0..=classes {
                    let mut plus = logits.clone();
                    plus[j][c] += step;
                    let mut minus = logits.clone();
                    minus[j][c] -= step;
                    let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
                    let analytic = grad_rw[j][c];
                    ensure(
                        (analytic - numeric).abs() <= 1e-5 * numeric.abs().max(1.0),
                        format!(
                            "fixture {fixture} row {j} class {c}: analytic {analytic} vs fd {numeric}"
                        ),
                    )?;
                }
            }
        }
        Ok(())
    });
}

// ------------------------------------------------------------ metric oracles

fn metric_dataset(gts: &[(&str, BoxF)]) -> Dataset {
    let mut by_image: std::collections::BTreeMap<&str, Vec<GtInstance>> = Default::default();
    for &(id, bbox) in gts {
        by_image
            .entry(id)
            .or_default()
            .push(GtInstance { bbox, class_id: 1 });
    }
    Dataset {
        records: by_image
            .into_iter()
            .map(|(id, instances)| ImageRecord {
                width: 1000.0,
                height: 1000.0,
                proposals: ProposalSet {
                    image_id: id.to_string(),
                    boxes: vec![BoxF::new(0.0, 0.0, 1.0, 1.0)],
                    features: vec![vec![0.0]],
                    scores: vec![vec![0.0, 0.0]],
                    image_labels: vec![true],
                },
                ground_truth: Some(GroundTruth { instances }),
            })
            .collect(),
        num_classes: 1,
        feature_dim: 1,
    }
}

#[test]
fn metric_oracles() {
    criterion("metric oracles (AP fixtures, perfect detector)", || {
        let b = BoxF::new(0.0, 0.0, 10.0, 10.0);

        // one GT, one hit at IoU 0.6
        let ds = metric_dataset(&[("a", b)]);
        let hit = Detection {
            image_id: "a".into(),
            class_id: 1,
            bbox: b.translated(2.5, 0.0),
            score: 0.9,
        };
        let ap = average_precision(std::slice::from_ref(&hit), &ds, 1, 0.5, ApMode::ElevenPoint)
            .ok_or("AP undefined")?;
        ensure((ap - 1.0).abs() <= 1e-12, format!("single-hit AP {ap}"))?;

        // duplicate on the same instance after the hit keeps AP at 1
        let dup = Detection {
            score: 0.8,
            bbox: b.translated(1.0, 0.0),
            ..hit.clone()
        };
        let ap = average_precision(&[hit.clone(), dup], &ds, 1, 0.5, ApMode::ElevenPoint)
            .ok_or("AP undefined")?;
        ensure((ap - 1.0).abs() <= 1e-12, format!("duplicate AP {ap}"))?;

        // two GT, one found: eleven-point AP is 6/11
        let ds2 = metric_dataset(&[("a", b), ("a", BoxF::new(100.0, 0.0, 110.0, 10.0))]);
        let ap = average_precision(&[hit], &ds2, 1, 0.5, ApMode::ElevenPoint)
            .ok_or("AP undefined")?;
        ensure(
            (ap - 6.0 / 11.0).abs() <= 1e-12,
            format!("half-recall AP {ap} vs {}", 6.0 / 11.0),
        )?;

        // perfect detector on a synthetic set: detections equal to GT
        let dataset = generate(&SynthConfig {
            seed: 5,
            num_images: 20,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let mut detections = Vec::new();
        for record in &dataset.records {
            for inst in &record.ground_truth.as_ref().unwrap().instances {
                detections.push(Detection {
                    image_id: record.proposals.image_id.clone(),
                    class_id: inst.class_id,
                    bbox: inst.bbox,
                    score: 1.0,
                });
            }
        }
        let map = mean_average_precision(&detections, &dataset, 0.5, ApMode::ElevenPoint).map;
        let loc = corloc(&detections, &dataset, 0.5).overall;
        ensure((map - 1.0).abs() <= 1e-12, format!("perfect mAP {map}"))?;
        ensure((loc - 1.0).abs() <= 1e-12, format!("perfect CorLoc {loc}"))
    });
}

// ------------------------------------------------------- mining-alone recall

#[test]
fn mining_alone_recall() {
    criterion("mining-alone recall (oracle scores, seed 7)", || {
        let start = Instant::now();
        let dataset = with_oracle_scores(
            &generate(&SynthConfig {
                seed: 7,
                ..Default::default()
            })
            .map_err(|e| e.to_string())?,
        );
        ensure(dataset.len() == 100, "default set should have 100 images")?;
        let cfg = MiningConfig::default();
        let mine_with = |mode: AblationMode| -> Vec<(String, Vec<AppearanceGraph>)> {
            dataset
                .records
                .iter()
                .map(|r| {
                    (
                        r.proposals.image_id.clone(),
                        mine_all_for_mode(&r.proposals, &cfg, mode),
                    )
                })
                .collect()
        };
        let full = instance_recall(&mine_with(AblationMode::Oim), &dataset, 0.5);
        let core_only = instance_recall(&mine_with(AblationMode::Baseline), &dataset, 0.5);
        ensure(full >= 0.9, format!("full mining recall {full} < 0.9"))?;
        ensure(
            core_only <= 0.5,
            format!("core-only recall {core_only} > 0.5"),
        )?;
        let elapsed = start.elapsed();
        ensure(
            elapsed.as_secs_f64() < 30.0,
            format!("took {elapsed:?}, budget 30 s"),
        )
    });
}

// ------------------------------------------------------------------ ablation

#[test]
fn ablation_ordering() {
    criterion("end-to-end ablation ordering (5 seeds)", || {
        let start = Instant::now();
        let dataset = generate(&SynthConfig {
            seed: 7,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        ensure(
            SynthConfig::default().part_confound_strength > 0.0,
            "part confounders must be on by default",
        )?;
        let report = ablation_suite(
            &dataset,
            &TrainConfig::default(),
            &[AblationMode::Baseline, AblationMode::Oim, AblationMode::OimIr],
            &[7, 8, 9, 10, 11],
        )
        .map_err(|e| e.to_string())?;
        let row = |mode: AblationMode| {
            report
                .rows
                .iter()
                .find(|r| r.mode == mode)
                .expect("requested mode present")
        };
        let baseline = row(AblationMode::Baseline);
        let full = row(AblationMode::Oim);
        let reweighted = row(AblationMode::OimIr);
        println!(
            "[acceptance]   medians: baseline mAP {:.4} recall {:.4} | oim mAP {:.4} recall {:.4} | oim_ir mAP {:.4}",
            baseline.median_map,
            baseline.median_instance_recall,
            full.median_map,
            full.median_instance_recall,
            reweighted.median_map,
        );
        ensure(
            reweighted.median_map > full.median_map,
            format!(
                "median mAP(oim_ir) {} <= mAP(oim) {}",
                reweighted.median_map, full.median_map
            ),
        )?;
        ensure(
            full.median_map > baseline.median_map,
            format!(
                "median mAP(oim) {} <= mAP(baseline) {}",
                full.median_map, baseline.median_map
            ),
        )?;
        ensure(
            full.median_instance_recall >= 2.0 * baseline.median_instance_recall,
            format!(
                "median recall(oim) {} < 2x recall(baseline) {}",
                full.median_instance_recall, baseline.median_instance_recall
            ),
        )?;
        let elapsed = start.elapsed();
        ensure(
            elapsed.as_secs_f64() < 600.0,
            format!("took {elapsed:?}, budget 10 min"),
        )
    });
}

// --------------------------------------------------------------- determinism

#[test]
fn artifact_determinism() {
    criterion("byte determinism across runs and thread counts", || {
        let bin = env!("CARGO_BIN_EXE_oim");
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let base = dir.path();

        let run = |cwd: &std::path::Path, args: &[&str]| -> Result<(), String> {
            let output = std::process::Command::new(bin)
                .current_dir(cwd)
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            if !output.status.success() {
                return Err(format!(
                    "`oim {}` failed: {}",
                    args.join(" "),
                    String::from_utf8_lossy(&output.stderr)
                ));
            }
            Ok(())
        };
        let read = |path: std::path::PathBuf| -> Result<Vec<u8>, String> {
            std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
        };

        // generate twice, second run with a different thread count
        for (sub, threads) in [("g1", "1"), ("g2", "1"), ("g3", "2")] {
            let out = base.join(sub);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            run(
                base,
                &[
                    "generate",
                    "--seed",
                    "7",
                    "--images",
                    "10",
                    "--out-dir",
                    out.to_str().unwrap(),
                    "--threads",
                    threads,
                ],
            )?;
        }
        let g1 = read(base.join("g1/dataset.jsonl"))?;
        ensure(
            g1 == read(base.join("g2/dataset.jsonl"))?,
            "generate differs across runs",
        )?;
        ensure(
            g1 == read(base.join("g3/dataset.jsonl"))?,
            "generate differs across thread counts",
        )?;
        ensure(
            read(base.join("g1/manifest.json"))? == read(base.join("g3/manifest.json"))?,
            "generate manifest differs across thread counts",
        )?;

        // train twice on the generated data, varying threads
        for (sub, threads) in [("t1", "1"), ("t2", "2")] {
            let out = base.join(sub);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            run(
                base,
                &[
                    "train",
                    "--data",
                    base.join("g1/dataset.jsonl").to_str().unwrap(),
                    "--iterations",
                    "60",
                    "--seed",
                    "7",
                    "--out-dir",
                    out.to_str().unwrap(),
                    "--threads",
                    threads,
                ],
            )?;
        }
        let ckpt = read(base.join("t1/checkpoint.bin"))?;
        ensure(
            ckpt == read(base.join("t2/checkpoint.bin"))?,
            "checkpoint differs across thread counts",
        )?;
        ensure(
            read(base.join("t1/trace.jsonl"))? == read(base.join("t2/trace.jsonl"))?,
            "trace differs across thread counts",
        )?;

        // evaluate twice
        for (sub, threads) in [("e1", "1"), ("e2", "2")] {
            let out = base.join(sub);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            run(
                base,
                &[
                    "evaluate",
                    "--data",
                    base.join("g1/dataset.jsonl").to_str().unwrap(),
                    "--checkpoint",
                    base.join("t1/checkpoint.bin").to_str().unwrap(),
                    "--out-dir",
                    out.to_str().unwrap(),
                    "--threads",
                    threads,
                ],
            )?;
        }
        ensure(
            read(base.join("e1/metrics.json"))? == read(base.join("e2/metrics.json"))?,
            "metrics differ across thread counts",
        )?;
        ensure(
            read(base.join("e1/detections.jsonl"))? == read(base.join("e2/detections.jsonl"))?,
            "detections differ across thread counts",
        )
    });
}
