use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use mritrans::config::{parse_assignment, quote, HeatmapScaling, RunConfig};
use mritrans::data::{load_pair_images, run_preprocess, DatasetManifest, PreprocessOptions, Split};
use mritrans::eval::figures::{abs_error, render_error_heatmap, render_feature_panels, HeatmapScale};
use mritrans::eval::{evaluate_checkpoint, run_ablation, AblationSpec, EvalOptions};
use mritrans::metrics::{LpipsBackend, Metric};
use mritrans::model::{decoder_panel_nodes, encoder_panel_nodes, FusionNodeId};
use mritrans::train::checkpoint::{latest_checkpoint, load_generator, resolve_checkpoint};
use mritrans::train::{train_from_manifest, TrainOptions};
use mritrans::{Cpu, CpuTrain, Error, Result};

use crate::{ConfigArgs, RUN_ROOT_ENV};

pub const RUN_META_FILE: &str = "run_meta.json";

fn run_root() -> PathBuf {
    std::env::var_os(RUN_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Timestamps live here and nowhere else, so every other output file is a
/// pure function of the inputs.
fn write_run_meta(dir: &Path, command: &str, started: u64) -> Result<()> {
    let meta = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "finished_unix": unix_now(),
    });
    let p = dir.join(RUN_META_FILE);
    std::fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;
    std::fs::write(&p, serde_json::to_string_pretty(&meta).expect("json") + "\n")
        .map_err(|e| Error::io_path("writing", &p, e))
}

/// `--set` assignments first, then dedicated flags, so flags win.
fn load_config(args: &ConfigArgs, flags: Vec<(&str, Option<String>)>) -> Result<RunConfig> {
    let mut ov = args.set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    ov.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    RunConfig::load(args.config.as_deref(), &ov)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| quote(&p.to_string_lossy()))
}

fn str_flag(s: &Option<String>) -> Option<String> {
    s.as_ref().map(|s| quote(s))
}

fn num_flag<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

fn read_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = cfg
        .data
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("no manifest: pass --manifest or set data.manifest".into()))?;
    let m = DatasetManifest::read(path)?;
    Ok(match cfg.data.few_shot_cap {
        Some(cap) => m.with_few_shot_cap(cap),
        None => m,
    })
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Root of the NIfTI tree.
    #[arg(long)]
    pub volumes: PathBuf,
    /// Output directory [default: $MRITRANS_RUN_ROOT/data].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Translation task, e.g. `T1->T2`.
    #[arg(long)]
    pub task: Option<String>,
    /// Training fraction.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cap the training list at this many pairs.
    #[arg(long)]
    pub few_shot: Option<usize>,
    /// Dataset label [default: name of the volume root].
    #[arg(long)]
    pub dataset: Option<String>,
    /// Filename pattern for one modality, `TAG=REGEX`. Repeatable.
    #[arg(long = "pattern", value_name = "TAG=REGEX")]
    pub patterns: Vec<String>,
}

pub fn preprocess(a: PreprocessArgs) -> Result<()> {
    let started = unix_now();
    let mut flags = vec![
        ("data.task", str_flag(&a.task)),
        ("data.split_ratio", num_flag(a.split)),
        ("data.seed", num_flag(a.seed)),
        ("data.few_shot_cap", num_flag(a.few_shot)),
        ("data.dataset", str_flag(&a.dataset)),
    ];
    let mut pattern_keys = Vec::new();
    for p in &a.patterns {
        let (tag, re) = parse_assignment(p)?;
        pattern_keys.push((format!("data.patterns.{tag}"), quote(&re)));
    }
    let owned: Vec<(String, String)> = pattern_keys;
    flags.extend(owned.iter().map(|(k, v)| (k.as_str(), Some(v.clone()))));
    let cfg = load_config(&a.cfg, flags)?;
    let out = a.out.unwrap_or_else(|| run_root().join("data"));
    let opts = PreprocessOptions {
        volume_root: a.volumes,
        out_root: out.clone(),
        patterns: cfg.data.modality_patterns()?,
        task: cfg.data.task.clone(),
        split_ratio: cfg.data.split_ratio,
        seed: cfg.data.seed,
        few_shot_cap: cfg.data.few_shot_cap,
        dataset: cfg.data.dataset.clone(),
    };
    let summary = run_preprocess(&opts)?;
    let m = &summary.manifest;
    println!(
        "{} train / {} test pairs for {} ({})",
        m.train.len(),
        m.test.len(),
        m.task,
        m.dataset
    );
    println!("manifest: {}", summary.manifest_path.display());
    if !summary.anomalies.is_empty() {
        println!(
            "warning: {} volume(s) skipped, see {}",
            summary.anomalies.len(),
            summary.anomaly_log.display()
        );
    }
    write_run_meta(&out, "preprocess", started)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Run directory [default: $MRITRANS_RUN_ROOT/<name>].
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    pub name: String,
    /// Continue from the run directory's latest checkpoint.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub few_shot: Option<usize>,
    /// `plain_residual` or `se_residual`.
    #[arg(long)]
    pub encoder: Option<String>,
    /// `unet` or `unetpp`.
    #[arg(long)]
    pub decoder: Option<String>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lr_g: Option<f64>,
    #[arg(long)]
    pub lr_d: Option<f64>,
    /// `bce` or `lsgan`.
    #[arg(long)]
    pub gan_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// 128 or 256.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let started = unix_now();
    let cfg = load_config(
        &a.cfg,
        vec![
            ("data.manifest", path_flag(&a.manifest)),
            ("data.few_shot_cap", num_flag(a.few_shot)),
            ("train.epochs", num_flag(a.epochs)),
            ("train.batch_size", num_flag(a.batch_size)),
            ("generator.encoder", str_flag(&a.encoder)),
            ("generator.decoder", str_flag(&a.decoder)),
            ("generator.base_channels", num_flag(a.base_channels)),
            ("train.loss.lambda1", num_flag(a.lambda1.map(toml_float))),
            ("train.loss.lambda2", num_flag(a.lambda2.map(toml_float))),
            ("train.lr_g", num_flag(a.lr_g.map(toml_float))),
            ("train.lr_d", num_flag(a.lr_d.map(toml_float))),
            ("train.gan_mode", str_flag(&a.gan_mode)),
            ("train.seed", num_flag(a.seed)),
            ("train.resolution", num_flag(a.resolution)),
            ("train.checkpoint_every", num_flag(a.checkpoint_every)),
        ],
    )?;
    let manifest = read_manifest(&cfg)?;
    let run_dir = a.run_dir.unwrap_or_else(|| run_root().join(&a.name));
    if !a.resume && latest_checkpoint(&run_dir)?.is_some() {
        return Err(Error::Config(format!(
            "{} already holds checkpoints; pass --resume or pick another --run-dir",
            run_dir.display()
        )));
    }
    cfg.write_frozen(&run_dir)?;
    let opts = TrainOptions {
        run_dir: run_dir.clone(),
        halt_after_epoch: None,
    };
    let device = Default::default();
    let (_, summary) = train_from_manifest::<CpuTrain>(
        &manifest,
        &cfg.generator,
        &cfg.discriminator,
        &cfg.train,
        &opts,
        a.resume,
        &device,
    )?;
    println!("{} steps over {} epoch(s)", summary.steps, summary.epochs_completed);
    if let Some(l) = summary.last {
        println!(
            "final step {}: adv {:.4} l1 {:.4} ms_ssim_loss {:.4} total {:.4} d_loss {:.4}",
            l.step, l.loss.adv, l.loss.l1, l.loss.ms_ssim_loss, l.loss.total, l.d_loss
        );
    }
    println!("log: {}", summary.log_path.display());
    if let Some(c) = &summary.last_checkpoint {
        println!("checkpoint: {}", c.display());
    }
    write_run_meta(&run_dir, "train", started)
}

// Keeps `0` from parsing as an integer where a float is expected.
fn toml_float(v: f64) -> String {
    if v.fract() == 0.0 && v.is_finite() {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Checkpoint directory, or a run directory (latest checkpoint).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Output directory [default: $MRITRANS_RUN_ROOT/eval/<dataset>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perceptual scorer command line.
    #[arg(long)]
    pub lpips: Option<String>,
    /// Also write each generated image.
    #[arg(long)]
    pub save_images: bool,
}

fn eval_options(cfg: &RunConfig, out: &Path) -> EvalOptions {
    EvalOptions {
        resolution: cfg.eval_resolution(),
        lpips: cfg.eval.lpips.as_deref().and_then(LpipsBackend::from_command_line),
        save_images: cfg.eval.save_images.then(|| out.join("images")),
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let started = unix_now();
    let cfg = load_config(
        &a.cfg,
        vec![
            ("data.manifest", path_flag(&a.manifest)),
            ("eval.resolution", num_flag(a.resolution)),
            ("eval.lpips", str_flag(&a.lpips)),
            ("eval.save_images", a.save_images.then(|| "true".to_string())),
        ],
    )?;
    let manifest = read_manifest(&cfg)?;
    let out = a
        .out
        .unwrap_or_else(|| run_root().join("eval").join(&manifest.dataset));
    let device = Default::default();
    let report = evaluate_checkpoint::<Cpu>(&a.checkpoint, &manifest, &eval_options(&cfg, &out), &device)?;
    let (per, agg) = report.write_csvs(&out)?;
    for n in &report.notes {
        println!("{n}");
    }
    for m in Metric::ALL {
        let s = report.summary(m);
        match (s.mean, s.std) {
            (Some(mean), Some(std)) => println!("{m}: {mean:.4} +/- {std:.4} (n={}, excluded={})", s.n, s.excluded),
            _ => println!("{m}: unavailable"),
        }
    }
    println!("per-sample: {}", per.display());
    println!("aggregate: {}", agg.display());
    write_run_meta(&out, "evaluate", started)
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Score untrained models only.
    #[arg(long)]
    pub dry_run: bool,
    /// Run the four configurations concurrently.
    #[arg(long)]
    pub parallel: bool,
    /// Output directory [default: $MRITRANS_RUN_ROOT/ablation].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub few_shot: Option<usize>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let started = unix_now();
    let cfg = load_config(
        &a.cfg,
        vec![
            ("data.manifest", path_flag(&a.manifest)),
            ("data.few_shot_cap", num_flag(a.few_shot)),
            ("train.epochs", num_flag(a.epochs)),
            ("generator.base_channels", num_flag(a.base_channels)),
            ("train.resolution", num_flag(a.resolution)),
            ("train.seed", num_flag(a.seed)),
        ],
    )?;
    let manifest = read_manifest(&cfg)?;
    let out = a.out.unwrap_or_else(|| run_root().join("ablation"));
    cfg.write_frozen(&out)?;
    let spec = AblationSpec {
        generator: cfg.generator.clone(),
        discriminator: cfg.discriminator.clone(),
        train: cfg.train.clone(),
        eval: eval_options(&cfg, &out),
        dry_run: a.dry_run,
        parallel: a.parallel,
    };
    let device = Default::default();
    let table = run_ablation::<CpuTrain>(&spec, &manifest, &out, &device)?;
    print!("{}", table.to_csv());
    println!("table: {}", out.join(mritrans::eval::ABLATION_CSV).display());
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        println!("warning: {failed} configuration(s) failed, see ablation_errors.txt");
    }
    write_run_meta(&out, "ablate", started)
}

#[derive(Args, Debug)]
pub struct FiguresArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory; panels go to `<out>/figures` [default: $MRITRANS_RUN_ROOT].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of test samples to draw.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Scale every heatmap by the largest error across the drawn samples.
    #[arg(long)]
    pub shared_scale: bool,
    /// Feature-panel nodes, e.g. `x_1_0,x_2_0`; default draws the encoder and decoder panels.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    #[arg(long)]
    pub resolution: Option<usize>,
}

pub fn figures(a: FiguresArgs) -> Result<()> {
    let started = unix_now();
    let cfg = load_config(
        &a.cfg,
        vec![
            ("data.manifest", path_flag(&a.manifest)),
            ("eval.figure_samples", num_flag(a.samples)),
            ("eval.heatmap_scale", a.shared_scale.then(|| quote("shared"))),
            ("eval.resolution", num_flag(a.resolution)),
        ],
    )?;
    let manifest = read_manifest(&cfg)?;
    let out = a.out.unwrap_or_else(run_root);
    let fig_dir = out.join("figures");
    let device = Default::default();
    let dir = resolve_checkpoint(&a.checkpoint)?;
    let (generator, meta) = load_generator::<Cpu>(&dir, &device)?;
    let res = cfg.eval_resolution();
    meta.generator.check_input_size(res.size())?;

    let custom: Vec<FusionNodeId> = a.nodes.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let mut panels: Vec<(String, Vec<FusionNodeId>)> = Vec::new();
    if custom.is_empty() {
        panels.push(("encoder".into(), encoder_panel_nodes(&meta.generator)));
        let dec = decoder_panel_nodes(&meta.generator);
        if dec.iter().all(|&n| meta.generator.has_node(n)) {
            panels.push(("decoder".into(), dec));
        } else {
            println!("note: {} has no x_0_1..x_0_L chain; decoder panel skipped", meta.generator.label());
        }
    } else {
        panels.push(("nodes".into(), custom));
    }

    let n = cfg.eval.figure_samples.min(manifest.test.len());
    if n == 0 {
        return Err(Error::DataIntegrity("manifest has no test samples to draw".into()));
    }
    let model = mritrans::eval::GeneratorTranslator { generator, device };
    let mut drawn = Vec::with_capacity(n);
    for i in 0..n {
        let (id, src, tgt) = load_pair_images(&manifest, Split::Test, i, res)?;
        let gen = mritrans::eval::Translator::translate(&model, &src)?;
        drawn.push((id, src, tgt, gen));
    }
    let scale = match cfg.eval.heatmap_scale {
        HeatmapScaling::PerImage => HeatmapScale::PerImage,
        HeatmapScaling::Shared => {
            let mut max = 0.0f64;
            for (_, _, t, g) in &drawn {
                max = abs_error(g.view(), t.view())?.iter().copied().fold(max, f64::max);
            }
            HeatmapScale::Shared { max }
        }
    };
    for (id, src, tgt, gen) in &drawn {
        let p = fig_dir.join(format!("heatmap_{id}.png"));
        render_error_heatmap(src.view(), tgt.view(), gen.view(), scale, &p)?;
        println!("{}", p.display());
        for (name, nodes) in &panels {
            let p = fig_dir.join(format!("features_{name}_{id}.png"));
            render_feature_panels(&model.generator, src, nodes, &p, &model.device)?;
            println!("{}", p.display());
        }
    }
    write_run_meta(&fig_dir, "figures", started)
}
