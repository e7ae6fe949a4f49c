//! End-to-end checks of the `oim` binary: exit codes, output files, and
//! the documented subcommand behaviors.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oim(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oim"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn generate_small(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data.jsonl");
    let out = oim(
        dir,
        &["generate", "--seed", "3", "--images", "6", "--out", data.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn generate_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = oim(dir.path(), &["generate", "--seed", "7", "--images", "5", "--out", "a.jsonl"]);
    assert!(a.status.success());
    let b = oim(dir.path(), &["generate", "--seed", "7", "--images", "5", "--out", "b.jsonl"]);
    assert!(b.status.success());
    assert_eq!(
        fs::read(dir.path().join("a.jsonl")).unwrap(),
        fs::read(dir.path().join("b.jsonl")).unwrap()
    );
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"generate\""));
    assert!(manifest.contains("\"seed\": 7"));
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = oim(dir.path(), &["generate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "stderr: {stderr}");
}

#[test]
fn missing_input_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = oim(dir.path(), &["train", "--data", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_dataset_line_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.jsonl"), "{broken\n").unwrap();
    let out = oim(dir.path(), &["mine", "--data", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn mine_reports_recall_on_oracle_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    let out = oim(dir.path(), &["mine", "--data", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mining.json")).unwrap())
            .unwrap();
    assert!(doc["instance_recall"].as_f64().unwrap() > 0.9);
    assert_eq!(doc["per_image"].as_array().unwrap().len(), 6);
}

#[test]
fn train_then_evaluate_produces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    let train = oim(
        dir.path(),
        &["train", "--data", data.to_str().unwrap(), "--iterations", "80", "--seed", "1"],
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(dir.path().join("checkpoint.bin").exists());
    assert!(dir.path().join("trace.jsonl").exists());

    let eval = oim(
        dir.path(),
        &["evaluate", "--data", data.to_str().unwrap(), "--checkpoint", "checkpoint.bin"],
    );
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert!(doc["mAP"].is_number());
    assert!(doc["CorLoc"].is_number());
    assert!(doc["per_class"].is_object());
}

#[test]
fn evaluate_perfect_external_detections() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    // detections equal to ground truth, written in the JSONL detections format
    let report = oim::io::load_dataset(&data).unwrap();
    let mut detections = Vec::new();
    for record in &report.dataset.records {
        for inst in &record.ground_truth.as_ref().unwrap().instances {
            detections.push(oim::eval::Detection {
                image_id: record.proposals.image_id.clone(),
                class_id: inst.class_id,
                bbox: inst.bbox,
                score: 1.0,
            });
        }
    }
    oim::io::save_detections(dir.path().join("dets.jsonl"), &detections).unwrap();

    let out = oim(
        dir.path(),
        &["evaluate", "--data", data.to_str().unwrap(), "--detections", "dets.jsonl"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(doc["mAP"].as_f64().unwrap(), 1.0);
    assert_eq!(doc["CorLoc"].as_f64().unwrap(), 1.0);
}

#[test]
fn ablate_reports_all_six_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    let out = oim(
        dir.path(),
        &[
            "ablate",
            "--data",
            data.to_str().unwrap(),
            "--iterations",
            "20",
            "--seeds",
            "1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ablation.json")).unwrap())
            .unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let modes: Vec<&str> = rows.iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(
        modes,
        vec!["baseline", "sg_only", "ag_only", "oim", "ir_only", "oim_ir"]
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    for mode in modes {
        assert!(stdout.contains(mode), "table missing {mode}");
    }
}

#[test]
fn render_emits_pgm_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    let out = oim(
        dir.path(),
        &[
            "render",
            "--data",
            data.to_str().unwrap(),
            "--class",
            "1",
            "--resolution",
            "32x24",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pgm = fs::read(dir.path().join("objectness_synth_000000_c1.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 24\n255\n"));
    assert_eq!(pgm.len(), 13 + 32 * 24);
    let svg = fs::read_to_string(dir.path().join("objectness_synth_000000_c1.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_file_applies_and_bad_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_small(dir.path());
    fs::write(dir.path().join("train.cfg"), "total_iterations = 10\nbeta = 0.3\n").unwrap();
    let ok = oim(
        dir.path(),
        &["train", "--data", data.to_str().unwrap(), "--config", "train.cfg"],
    );
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("trained 10 iterations"));

    fs::write(dir.path().join("bad.cfg"), "betta = 0.3\n").unwrap();
    let bad = oim(
        dir.path(),
        &["train", "--data", data.to_str().unwrap(), "--config", "bad.cfg"],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("betta"));
}
