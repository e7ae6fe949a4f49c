//! The `oim` command-line surface.
//!
//! Subcommands: `generate` (synthetic dataset), `mine` (graph mining and
//! recall), `train` (checkpoint + trace), `evaluate` (metrics JSON),
//! `ablate` (mode-by-mode table), `render` (objectness PGM + detection
//! SVG). Exit codes: 0 success, 1 validation error (bad flags, malformed
//! inputs), 2 runtime failure. Every run writes `manifest.json` next to
//! its outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::eval::{corloc, instance_recall, mean_average_precision, ApMode, Detection};
use crate::io::config::{apply_synth_config, apply_train_config};
use crate::io::{
    load_checkpoint, load_dataset, load_detections, render_boxes_svg, render_objectness_map,
    save_checkpoint, save_dataset, save_detections, write_manifest, Manifest,
};
use crate::mining::MiningConfig;
use crate::model::{AppearanceGraph, Dataset};
use crate::synth::{generate, oracle_scores, with_oracle_scores, SynthConfig};
use crate::trainer::{
    ablation_suite, detect, mine_all_for_mode, model_scores, train, AblationMode, DetectConfig,
    TrainConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "oim",
    version,
    about = "Object instance mining on proposal features: synthetic data, graph mining, MIL training, VOC-style evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// key=value config file applied before other flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads for per-image parallel sections (0 = automatic).
    /// Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as JSON Lines.
    Generate(GenerateArgs),
    /// Mine instance graphs from oracle or model scores.
    Mine(MineArgs),
    /// Train the detection head and write a checkpoint plus trace.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a detections file against ground truth.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every requested ablation mode over seeds.
    Ablate(AblateArgs),
    /// Render an objectness map (PGM) and detection outlines (SVG).
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output path; defaults to `<out-dir>/dataset.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Debug, Args)]
struct MineArgs {
    /// Dataset to mine (JSON Lines).
    #[arg(long)]
    data: PathBuf,
    /// Score source: a trained checkpoint. Without it, oracle scores from
    /// ground truth are used.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long, default_value = "oim")]
    mode: AblationModeArg,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mode: Option<AblationModeArg>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Evaluate a trained model.
    #[arg(long, conflicts_with = "detections")]
    checkpoint: Option<PathBuf>,
    /// Evaluate an external detections file (JSON Lines).
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Average-precision interpolation: `eleven-point` or `area`.
    #[arg(long, default_value = "eleven-point")]
    ap_mode: String,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 0.3)]
    nms: f64,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated modes; defaults to all six.
    #[arg(long)]
    modes: Option<String>,
    /// Comma-separated seeds; defaults to 7,8,9,10,11.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    data: PathBuf,
    /// Image id to render; defaults to the first record.
    #[arg(long)]
    image: Option<String>,
    /// Foreground class to visualize.
    #[arg(long)]
    class: usize,
    /// Score source; oracle scores without it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Raster size as WxH; defaults to the canvas size.
    #[arg(long)]
    resolution: Option<String>,
}

#[derive(Debug, Clone)]
struct AblationModeArg(AblationMode);

impl std::str::FromStr for AblationModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(AblationModeArg)
    }
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Parses argv and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    if cli.threads > 0 {
        // ignore failure when a pool already exists (repeat in-process runs)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("oim: error: {}", err.message());
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    fs::create_dir_all(&cli.out_dir).map_err(runtime)?;
    let config_entries = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(validation)?;
            crate::io::parse_key_values(&text).map_err(validation)?
        }
        None => Vec::new(),
    };
    match &cli.command {
        Command::Generate(args) => cmd_generate(&cli, args, &config_entries),
        Command::Mine(args) => cmd_mine(&cli, args),
        Command::Train(args) => cmd_train(&cli, args, &config_entries),
        Command::Evaluate(args) => cmd_evaluate(&cli, args),
        Command::Ablate(args) => cmd_ablate(&cli, args, &config_entries),
        Command::Render(args) => cmd_render(&cli, args),
    }
}

fn load_validated_dataset(path: &Path) -> Result<Dataset, CliError> {
    let report = load_dataset(path).map_err(validation)?;
    for warning in &report.warnings {
        eprintln!("oim: warning: {warning}");
    }
    Ok(report.dataset)
}

fn cmd_generate(
    cli: &Cli,
    args: &GenerateArgs,
    config_entries: &[(String, String)],
) -> Result<(), CliError> {
    let mut cfg = SynthConfig::default();
    apply_synth_config(&mut cfg, config_entries).map_err(validation)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(images) = args.images {
        cfg.num_images = images;
    }
    if let Some(classes) = args.classes {
        cfg.num_classes = classes;
    }
    let dataset = generate(&cfg).map_err(validation)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join("dataset.jsonl"));
    save_dataset(&out, &dataset).map_err(runtime)?;
    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "generate",
            Some(cfg.seed),
            serde_json::to_value(&cfg).unwrap(),
        ),
    )
    .map_err(runtime)?;
    println!(
        "wrote {} records ({} classes, feature dim {}) to {}",
        dataset.len(),
        dataset.num_classes,
        dataset.feature_dim,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MinedImage {
    image_id: String,
    graphs: Vec<AppearanceGraph>,
}

#[derive(Serialize)]
struct MiningOutput {
    mode: AblationMode,
    alpha: f64,
    iou_threshold: f64,
    instance_recall: Option<f64>,
    per_image: Vec<MinedImage>,
}

fn cmd_mine(cli: &Cli, args: &MineArgs) -> Result<(), CliError> {
    let dataset = load_validated_dataset(&args.data)?;
    let mining_cfg = MiningConfig {
        alpha: args.alpha.unwrap_or(MiningConfig::default().alpha),
        iou_threshold: args
            .iou_threshold
            .unwrap_or(MiningConfig::default().iou_threshold),
        ..Default::default()
    };
    let mode = args.mode.0;

    let scored = match &args.checkpoint {
        Some(path) => {
            let model = load_checkpoint(path).map_err(validation)?;
            if model.feature_dim() != dataset.feature_dim
                || model.num_classes() != dataset.num_classes
            {
                return Err(CliError::Validation(format!(
                    "checkpoint shape ({}, {}) does not match dataset ({}, {})",
                    model.feature_dim(),
                    model.num_classes(),
                    dataset.feature_dim,
                    dataset.num_classes
                )));
            }
            let records = dataset
                .records
                .iter()
                .map(|r| crate::model::ImageRecord {
                    proposals: r.proposals.with_scores(model_scores(&model, r)),
                    ..r.clone()
                })
                .collect();
            Dataset { records, ..dataset.clone() }
        }
        None => {
            if !dataset.has_ground_truth() {
                return Err(CliError::Validation(
                    "oracle mining needs ground truth on every record (or pass --checkpoint)"
                        .to_string(),
                ));
            }
            with_oracle_scores(&dataset)
        }
    };

    let per_image: Vec<MinedImage> = scored
        .records
        .iter()
        .map(|r| MinedImage {
            image_id: r.proposals.image_id.clone(),
            graphs: mine_all_for_mode(&r.proposals, &mining_cfg, mode),
        })
        .collect();
    let recall = dataset.has_ground_truth().then(|| {
        let pairs: Vec<(String, Vec<AppearanceGraph>)> = per_image
            .iter()
            .map(|m| (m.image_id.clone(), m.graphs.clone()))
            .collect();
        instance_recall(&pairs, &dataset, 0.5)
    });

    let output = MiningOutput {
        mode,
        alpha: mining_cfg.alpha,
        iou_threshold: mining_cfg.iou_threshold,
        instance_recall: recall,
        per_image,
    };
    let path = cli.out_dir.join("mining.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&output).unwrap() + "\n",
    )
    .map_err(runtime)?;
    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "mine",
            cli.seed,
            serde_json::json!({
                "data": args.data.display().to_string(),
                "mode": mode,
                "alpha": mining_cfg.alpha,
                "iou_threshold": mining_cfg.iou_threshold,
                "scores": if args.checkpoint.is_some() { "checkpoint" } else { "oracle" },
            }),
        ),
    )
    .map_err(runtime)?;
    match recall {
        Some(r) => println!("mined {} images, instance recall {:.4}", output.per_image.len(), r),
        None => println!("mined {} images", output.per_image.len()),
    }
    Ok(())
}

fn train_config_from(
    cli: &Cli,
    config_entries: &[(String, String)],
    mode: Option<AblationMode>,
    iterations: Option<usize>,
    batch_size: Option<usize>,
    beta: Option<f64>,
    heads: Option<usize>,
) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::default();
    apply_train_config(&mut cfg, config_entries).map_err(validation)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.ablation = mode;
    }
    if let Some(iterations) = iterations {
        cfg.total_iterations = iterations;
    }
    if let Some(batch) = batch_size {
        cfg.batch_size = batch;
    }
    if let Some(beta) = beta {
        cfg.beta = beta;
    }
    if let Some(heads) = heads {
        cfg.refine_heads = heads;
    }
    cfg.validate().map_err(validation)?;
    Ok(cfg)
}

fn cmd_train(
    cli: &Cli,
    args: &TrainArgs,
    config_entries: &[(String, String)],
) -> Result<(), CliError> {
    let dataset = load_validated_dataset(&args.data)?;
    let cfg = train_config_from(
        cli,
        config_entries,
        args.mode.as_ref().map(|m| m.0),
        args.iterations,
        args.batch_size,
        args.beta,
        args.heads,
    )?;
    let (model, trace) = train(&dataset, &cfg).map_err(|e| match e {
        crate::trainer::TrainError::NonFiniteLoss { .. } => runtime(e),
        other => validation(other),
    })?;

    let ckpt_path = cli.out_dir.join("checkpoint.bin");
    save_checkpoint(&ckpt_path, &model).map_err(runtime)?;
    let trace_path = cli.out_dir.join("trace.jsonl");
    let mut trace_text = String::new();
    for record in &trace.records {
        trace_text.push_str(&serde_json::to_string(record).unwrap());
        trace_text.push('\n');
    }
    fs::write(&trace_path, trace_text).map_err(runtime)?;
    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "train",
            Some(cfg.seed),
            serde_json::json!({
                "data": args.data.display().to_string(),
                "train": serde_json::to_value(&cfg).unwrap(),
            }),
        ),
    )
    .map_err(runtime)?;
    if let Some(last) = trace.records.last() {
        println!(
            "trained {} iterations (mode {}): image loss {:.4}, refine losses {:?}",
            cfg.total_iterations,
            cfg.ablation,
            last.loss_image,
            last.loss_refine
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
        );
    }
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

#[derive(Serialize)]
struct PerClassMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    corloc: Option<f64>,
}

#[derive(Serialize)]
struct MetricsDocument {
    per_class: BTreeMap<String, PerClassMetrics>,
    #[serde(rename = "mAP")]
    map: f64,
    #[serde(rename = "CorLoc")]
    corloc: f64,
    instance_recall: Option<f64>,
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), CliError> {
    let dataset = load_validated_dataset(&args.data)?;
    if !dataset.has_ground_truth() {
        return Err(CliError::Validation(
            "evaluation needs ground truth on every record".to_string(),
        ));
    }
    let ap_mode = match args.ap_mode.as_str() {
        "eleven-point" | "eleven_point" => ApMode::ElevenPoint,
        "area" => ApMode::Area,
        other => {
            return Err(CliError::Validation(format!(
                "unknown --ap-mode `{other}` (expected eleven-point or area)"
            )))
        }
    };

    let (detections, recall): (Vec<Detection>, Option<f64>) = match (&args.checkpoint, &args.detections) {
        (Some(path), None) => {
            let model = load_checkpoint(path).map_err(validation)?;
            if model.feature_dim() != dataset.feature_dim
                || model.num_classes() != dataset.num_classes
            {
                return Err(CliError::Validation(
                    "checkpoint shape does not match dataset".to_string(),
                ));
            }
            let dcfg = DetectConfig {
                top_k: args.top_k,
                nms_threshold: args.nms,
            };
            let dets = detect(&model, &dataset, &dcfg);
            save_detections(cli.out_dir.join("detections.jsonl"), &dets).map_err(runtime)?;
            let mining_cfg = MiningConfig {
                alpha: TrainConfig::default().alpha_final,
                ..Default::default()
            };
            let graphs: Vec<(String, Vec<AppearanceGraph>)> = dataset
                .records
                .iter()
                .map(|r| {
                    let ps = r.proposals.with_scores(model_scores(&model, r));
                    (
                        ps.image_id.clone(),
                        mine_all_for_mode(&ps, &mining_cfg, AblationMode::Oim),
                    )
                })
                .collect();
            let recall = instance_recall(&graphs, &dataset, 0.5);
            (dets, Some(recall))
        }
        (None, Some(path)) => (load_detections(path).map_err(validation)?, None),
        (None, None) => {
            return Err(CliError::Validation(
                "evaluate needs --checkpoint or --detections".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap forbids both"),
    };

    let map_report = mean_average_precision(&detections, &dataset, 0.5, ap_mode);
    let corloc_report = corloc(&detections, &dataset, 0.5);
    let mut per_class = BTreeMap::new();
    for class_id in 1..=dataset.num_classes {
        let entry = PerClassMetrics {
            ap: map_report.per_class.get(&class_id).copied(),
            corloc: corloc_report.per_class.get(&class_id).copied(),
        };
        per_class.insert(class_id.to_string(), entry);
    }
    let doc = MetricsDocument {
        per_class,
        map: map_report.map,
        corloc: corloc_report.overall,
        instance_recall: recall,
    };
    let path = cli.out_dir.join("metrics.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").map_err(runtime)?;
    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "evaluate",
            cli.seed,
            serde_json::json!({
                "data": args.data.display().to_string(),
                "source": if args.checkpoint.is_some() { "checkpoint" } else { "detections" },
                "ap_mode": args.ap_mode,
                "top_k": args.top_k,
                "nms": args.nms,
            }),
        ),
    )
    .map_err(runtime)?;
    println!(
        "mAP {:.4}  CorLoc {:.4}  instance recall {}",
        doc.map,
        doc.corloc,
        doc.instance_recall
            .map_or("n/a".to_string(), |r| format!("{r:.4}"))
    );
    println!("metrics: {}", path.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|part| {
            part.trim().parse::<T>().map_err(|e| {
                CliError::Validation(format!("bad {what} `{}`: {e}", part.trim()))
            })
        })
        .collect()
}

fn cmd_ablate(
    cli: &Cli,
    args: &AblateArgs,
    config_entries: &[(String, String)],
) -> Result<(), CliError> {
    let dataset = load_validated_dataset(&args.data)?;
    let base_cfg = train_config_from(cli, config_entries, None, args.iterations, None, None, None)?;
    let modes: Vec<AblationMode> = match &args.modes {
        Some(text) => parse_list(text, "mode")?,
        None => AblationMode::all().to_vec(),
    };
    let seeds: Vec<u64> = match &args.seeds {
        Some(text) => parse_list(text, "seed")?,
        None => vec![7, 8, 9, 10, 11],
    };
    let report = ablation_suite(&dataset, &base_cfg, &modes, &seeds).map_err(|e| match e {
        crate::trainer::TrainError::NonFiniteLoss { .. } => runtime(e),
        other => validation(other),
    })?;

    let path = cli.out_dir.join("ablation.json");
    fs::write(&path, serde_json::to_string_pretty(&report).unwrap() + "\n").map_err(runtime)?;
    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "ablate",
            cli.seed,
            serde_json::json!({
                "data": args.data.display().to_string(),
                "modes": modes,
                "seeds": seeds,
                "train": serde_json::to_value(&base_cfg).unwrap(),
            }),
        ),
    )
    .map_err(runtime)?;

    println!("{:<10} {:>8} {:>8} {:>16}", "mode", "mAP", "CorLoc", "instance_recall");
    for row in &report.rows {
        println!(
            "{:<10} {:>8.4} {:>8.4} {:>16.4}",
            row.mode.to_string(),
            row.median_map,
            row.median_corloc,
            row.median_instance_recall
        );
    }
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_render(cli: &Cli, args: &RenderArgs) -> Result<(), CliError> {
    let dataset = load_validated_dataset(&args.data)?;
    if dataset.is_empty() {
        return Err(CliError::Validation("dataset is empty".to_string()));
    }
    if args.class == 0 || args.class > dataset.num_classes {
        return Err(CliError::Validation(format!(
            "class {} outside 1..={}",
            args.class, dataset.num_classes
        )));
    }
    let record = match &args.image {
        Some(id) => dataset
            .records
            .iter()
            .find(|r| &r.proposals.image_id == id)
            .ok_or_else(|| CliError::Validation(format!("image `{id}` not in dataset")))?,
        None => &dataset.records[0],
    };

    let scores = match &args.checkpoint {
        Some(path) => {
            let model = load_checkpoint(path).map_err(validation)?;
            model_scores(&model, record)
        }
        None => oracle_scores(record).ok_or_else(|| {
            CliError::Validation(
                "oracle rendering needs ground truth (or pass --checkpoint)".to_string(),
            )
        })?,
    };

    let (out_w, out_h) = match &args.resolution {
        Some(text) => {
            let parts: Vec<&str> = text.split('x').collect();
            let bad = || CliError::Validation(format!("bad --resolution `{text}` (want WxH)"));
            if parts.len() != 2 {
                return Err(bad());
            }
            let w: usize = parts[0].parse().map_err(|_| bad())?;
            let h: usize = parts[1].parse().map_err(|_| bad())?;
            if w == 0 || h == 0 {
                return Err(bad());
            }
            (w, h)
        }
        None => (record.width.round() as usize, record.height.round() as usize),
    };

    let pgm = render_objectness_map(record, &scores, args.class, out_w, out_h);
    let stem = format!("objectness_{}_c{}", record.proposals.image_id, args.class);
    let pgm_path = cli.out_dir.join(format!("{stem}.pgm"));
    fs::write(&pgm_path, pgm.to_bytes()).map_err(runtime)?;

    // companion SVG: suppressed top boxes of the class as outlines
    let ps = record.proposals.with_scores(scores);
    let top = crate::geometry::top_k_by_score(&ps, args.class, 100);
    let boxes: Vec<_> = top.iter().map(|&j| ps.boxes[j]).collect();
    let svals: Vec<_> = top.iter().map(|&j| ps.score(j, args.class)).collect();
    let kept = crate::geometry::nms(&boxes, &svals, 0.3);
    let outlined: Vec<(crate::model::BoxF, String, f64)> = kept
        .iter()
        .map(|&k| (boxes[k], format!("c{}", args.class), svals[k]))
        .collect();
    let svg = render_boxes_svg(record.width, record.height, &outlined);
    let svg_path = cli.out_dir.join(format!("{stem}.svg"));
    fs::write(&svg_path, svg).map_err(runtime)?;

    write_manifest(
        &cli.out_dir,
        &Manifest::new(
            "render",
            cli.seed,
            serde_json::json!({
                "data": args.data.display().to_string(),
                "image": record.proposals.image_id,
                "class": args.class,
                "resolution": format!("{out_w}x{out_h}"),
                "scores": if args.checkpoint.is_some() { "checkpoint" } else { "oracle" },
            }),
        ),
    )
    .map_err(runtime)?;
    println!("wrote {} and {}", pgm_path.display(), svg_path.display());
    Ok(())
}
