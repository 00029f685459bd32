//! The encoder x decoder ablation grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use burn::module::Module;
use burn::tensor::backend::AutodiffBackend;

use super::evaluate::{evaluate, EvalOptions, GeneratorTranslator, Provenance};
use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricReport};
use crate::model::{DecoderKind, DiscriminatorConfig, EncoderKind, Generator, GeneratorConfig};
use crate::train::trainer::{inference_generator, train_from_manifest, TrainOptions};
use crate::train::TrainConfig;

pub const ABLATION_CSV: &str = "ablation_table.csv";

/// Shared settings; encoder and decoder kinds of `generator` are overridden per row.
#[derive(Debug, Clone)]
pub struct AblationSpec {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    /// Skip training and score freshly initialized models.
    pub dry_run: bool,
    /// Run the four configurations on separate threads.
    pub parallel: bool,
}

/// The four configurations in table order: ResNet & U-Net, SEResNet & U-Net,
/// ResNet & U-Net++, SEResNet & U-Net++.
pub fn ablation_grid(base: &GeneratorConfig) -> [GeneratorConfig; 4] {
    let with = |e, d| GeneratorConfig {
        encoder: e,
        decoder: d,
        ..base.clone()
    };
    [
        with(EncoderKind::PlainResidual, DecoderKind::Unet),
        with(EncoderKind::SeResidual, DecoderKind::Unet),
        with(EncoderKind::PlainResidual, DecoderKind::Unetpp),
        with(EncoderKind::SeResidual, DecoderKind::Unetpp),
    ]
}

fn slug(cfg: &GeneratorConfig) -> String {
    format!("{}-{}", cfg.encoder, cfg.decoder)
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub config: GeneratorConfig,
    pub params: usize,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("configuration,params");
        for m in Metric::ALL {
            let _ = write!(s, ",{m}");
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{},{}", row.config.label(), row.params);
            for m in Metric::ALL {
                let cell = match &row.report {
                    None => "failed".to_string(),
                    Some(r) => match r.summary(m).mean {
                        Some(v) if v.is_infinite() => "inf".into(),
                        Some(v) => format!("{v}"),
                        None => "unavailable".into(),
                    },
                };
                let _ = write!(s, ",{cell}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;
        let path = dir.join(ABLATION_CSV);
        std::fs::write(&path, self.to_csv()).map_err(|e| Error::io_path("writing", &path, e))?;
        Ok(path)
    }
}

fn run_one<B: AutodiffBackend>(
    spec: &AblationSpec,
    cfg: &GeneratorConfig,
    manifest: &DatasetManifest,
    out_dir: &Path,
    device: &B::Device,
) -> Result<MetricReport> {
    let run_dir = out_dir.join("runs").join(slug(cfg));
    let (generator, provenance) = if spec.dry_run {
        let g = Generator::<B::InnerBackend>::new(cfg, spec.train.seed, device)?;
        (g, Provenance::default())
    } else {
        let opts = TrainOptions {
            run_dir: run_dir.clone(),
            halt_after_epoch: None,
        };
        let (trainer, summary) =
            train_from_manifest::<B>(manifest, cfg, &spec.discriminator, &spec.train, &opts, false, device)?;
        let prov = match &summary.last_checkpoint {
            Some(dir) => Provenance::from_meta(dir, &trainer.meta),
            None => Provenance::default(),
        };
        (inference_generator(&trainer.generator), prov)
    };
    let model = GeneratorTranslator {
        generator,
        device: device.clone(),
    };
    let report = evaluate(&model, manifest, &spec.eval, &provenance)?;
    report.write_csvs(&run_dir.join("eval"))?;
    Ok(report)
}

/// Trains (unless dry-run) and evaluates each grid configuration on the same
/// manifest and seed. A failing configuration keeps its row with `failed` cells.
pub fn run_ablation<B: AutodiffBackend>(
    spec: &AblationSpec,
    manifest: &DatasetManifest,
    out_dir: &Path,
    device: &B::Device,
) -> Result<AblationTable> {
    let grid = ablation_grid(&spec.generator);
    for cfg in &grid {
        cfg.validate()?;
    }
    let outcome = |cfg: &GeneratorConfig| -> AblationRow {
        let params = match Generator::<B::InnerBackend>::new(cfg, spec.train.seed, device) {
            Ok(g) => g.num_params(),
            Err(_) => 0,
        };
        match run_one::<B>(spec, cfg, manifest, out_dir, device) {
            Ok(report) => AblationRow {
                config: cfg.clone(),
                params,
                report: Some(report),
                error: None,
            },
            Err(e) => {
                log::error!("ablation run {} failed: {e}", cfg.label());
                AblationRow {
                    config: cfg.clone(),
                    params,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let rows: Vec<AblationRow> = if spec.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = grid.iter().map(|cfg| s.spawn(move || outcome(cfg))).collect();
            handles.into_iter().map(|h| h.join().expect("ablation worker panicked")).collect()
        })
    } else {
        grid.iter().map(outcome).collect()
    };
    let table = AblationTable { rows };
    table.write(out_dir)?;
    let errors: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.config.label())))
        .collect();
    if !errors.is_empty() {
        let p = out_dir.join("ablation_errors.txt");
        std::fs::write(&p, errors.join("\n") + "\n").map_err(|e| Error::io_path("writing", &p, e))?;
    }
    Ok(table)
}
