//! Alternating discriminator/generator updates, CSV logging and resumable runs.
//!
//! A run directory holds:
//!
//! ```text
//! train_log.csv          one row per optimizer step
//! checkpoints/epoch_<n>/ see the checkpoint module
//! manifest.txt           copy of the training manifest (when trained from one)
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use burn::module::{AutodiffModule, Module};
use burn::optim::adaptor::OptimizerAdaptor;
use burn::optim::{GradientsParams, Optimizer};
use burn::prelude::*;
use burn::tensor::backend::AutodiffBackend;
use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::checkpoint::{
    checkpoint_dir, latest_checkpoint, load_record_bytes, read_checkpoint, record_bytes,
    save_checkpoint, CheckpointFiles, CheckpointMeta,
};
use super::config::TrainConfig;
use crate::data::{images_to_tensor, load_pair_images, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::metrics::SsimParams;
use crate::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::objectives::{discriminator_loss, gan_loss, l1_loss, ms_ssim_loss, total_generator_loss, LossBreakdown};

pub const LOG_FILE: &str = "train_log.csv";
pub const LOG_HEADER: &str = "step,adv,l1,ms_ssim_loss,total,d_loss";

/// Offset between the generator and discriminator initialization seeds.
const DISC_SEED_OFFSET: u64 = 0x5851_f42d_4c95_7f2d;

/// Paired 8-bit `(H, W, 3)` training images.
pub trait PairSource {
    fn len(&self) -> usize;
    fn pair(&self, index: usize) -> Result<(Array3<u8>, Array3<u8>)>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pairs held in memory.
pub struct InMemoryPairs {
    pub pairs: Vec<(Array3<u8>, Array3<u8>)>,
}

impl PairSource for InMemoryPairs {
    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn pair(&self, index: usize) -> Result<(Array3<u8>, Array3<u8>)> {
        self.pairs
            .get(index)
            .cloned()
            .ok_or_else(|| Error::DataIntegrity(format!("pair index {index} out of range")))
    }
}

/// The training side of a manifest, loaded once at the configured resolution.
/// Test entries are never opened.
pub struct ManifestTrainPairs {
    inner: InMemoryPairs,
}

impl ManifestTrainPairs {
    pub fn load(manifest: &DatasetManifest, config: &TrainConfig) -> Result<Self> {
        let n = manifest.entries(Split::Train).len();
        let pairs = (0..n)
            .map(|i| load_pair_images(manifest, Split::Train, i, config.resolution).map(|(_, s, t)| (s, t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ManifestTrainPairs {
            inner: InMemoryPairs { pairs },
        })
    }
}

impl PairSource for ManifestTrainPairs {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn pair(&self, index: usize) -> Result<(Array3<u8>, Array3<u8>)> {
        self.inner.pair(index)
    }
}

/// Sample order of epoch `epoch` (1-based).
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub loss: LossBreakdown,
    pub d_loss: f64,
}

impl StepLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.loss.adv, self.loss.l1, self.loss.ms_ssim_loss, self.loss.total, self.d_loss
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub run_dir: PathBuf,
    /// Stop (after checkpointing) once this epoch completes.
    pub halt_after_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs_completed: usize,
    pub last: Option<StepLog>,
    pub last_checkpoint: Option<PathBuf>,
    pub log_path: PathBuf,
}

pub struct Trainer<B: AutodiffBackend> {
    pub generator: Generator<B>,
    pub discriminator: Discriminator<B>,
    opt_g: OptimizerAdaptor<Adam, Generator<B>, B>,
    opt_d: OptimizerAdaptor<Adam, Discriminator<B>, B>,
    pub meta: CheckpointMeta,
    ssim: SsimParams,
    device: B::Device,
}

impl<B: AutodiffBackend> Trainer<B> {
    pub fn new(
        generator: &GeneratorConfig,
        discriminator: &DiscriminatorConfig,
        train: &TrainConfig,
        device: &B::Device,
    ) -> Result<Self> {
        train.validate()?;
        let g = Generator::new(generator, train.seed, device)?;
        let d = Discriminator::new(discriminator, train.seed ^ DISC_SEED_OFFSET, device)?;
        let adam = Adam::new(train.beta1, train.beta2, train.epsilon);
        Ok(Trainer {
            generator: g,
            discriminator: d,
            opt_g: adam.init(),
            opt_d: adam.init(),
            meta: CheckpointMeta::new(generator.clone(), discriminator.clone(), train.clone()),
            ssim: SsimParams::unit_range(),
            device: device.clone(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.meta.train
    }

    pub fn step(&self) -> usize {
        self.meta.step
    }

    pub fn epoch(&self) -> usize {
        self.meta.epoch
    }

    pub fn device(&self) -> &B::Device {
        &self.device
    }

    fn diverged(&self, step: usize, component: &str) -> Error {
        Error::Divergence {
            step,
            last_finite_step: self.meta.last_finite_step,
            component: component.to_string(),
        }
    }

    /// Generator objective for a batch whose generated images are `fake`.
    pub fn generator_loss(
        &self,
        source: Tensor<B, 4>,
        target: Tensor<B, 4>,
        fake: Tensor<B, 4>,
    ) -> Result<(Tensor<B, 1>, LossBreakdown)> {
        let cfg = &self.meta.train;
        let logits = self.discriminator.forward(source, fake.clone());
        let adv = gan_loss(logits, 1.0, cfg.gan_mode);
        let l1 = l1_loss(fake.clone(), target.clone())?;
        let ms = ms_ssim_loss(fake, target, &self.ssim, cfg.ms_ssim_scales)?;
        total_generator_loss(adv, l1, ms, &cfg.loss)
    }

    /// One discriminator update on (real, detached fake), then one generator
    /// update through the refreshed discriminator.
    pub fn train_step(&mut self, source: Tensor<B, 4>, target: Tensor<B, 4>) -> Result<StepLog> {
        let step = self.meta.step + 1;
        let cfg = self.meta.train.clone();
        let fake = self.generator.forward(source.clone())?;

        let real_logits = self.discriminator.forward(source.clone(), target.clone());
        let fake_logits = self.discriminator.forward(source.clone(), fake.clone().detach());
        let d_loss = discriminator_loss(real_logits, fake_logits, cfg.gan_mode);
        let d_value = d_loss.clone().into_scalar().elem::<f64>();
        if !d_value.is_finite() {
            return Err(self.diverged(step, "d_loss"));
        }
        let grads = GradientsParams::from_grads(d_loss.backward(), &self.discriminator);
        self.discriminator = self.opt_d.step(cfg.lr_d, self.discriminator.clone(), grads);

        let (total, loss) = self.generator_loss(source, target, fake).map_err(|e| match e {
            Error::Divergence { component, .. } => self.diverged(step, &component),
            other => other,
        })?;
        if !loss.total.is_finite() {
            return Err(self.diverged(step, "total"));
        }
        let grads = GradientsParams::from_grads(total.backward(), &self.generator);
        self.generator = self.opt_g.step(cfg.lr_g, self.generator.clone(), grads);

        self.meta.step = step;
        self.meta.last_finite_step = Some(step);
        Ok(StepLog { step, loss, d_loss: d_value })
    }

    fn batch(&self, data: &dyn PairSource, indices: &[usize]) -> Result<(Tensor<B, 4>, Tensor<B, 4>)> {
        let mut src = Vec::with_capacity(indices.len());
        let mut tgt = Vec::with_capacity(indices.len());
        for &i in indices {
            let (s, t) = data.pair(i)?;
            src.push(s);
            tgt.push(t);
        }
        Ok((images_to_tensor(&src, &self.device), images_to_tensor(&tgt, &self.device)))
    }

    /// Serialized state, ready for [`save_checkpoint`].
    pub fn checkpoint_files(&self) -> Result<CheckpointFiles> {
        Ok(CheckpointFiles {
            meta: self.meta.clone(),
            generator: record_bytes::<B, _>(self.generator.clone().into_record())?,
            discriminator: record_bytes::<B, _>(self.discriminator.clone().into_record())?,
            optim_g: record_bytes::<B, _>(self.opt_g.to_record())?,
            optim_d: record_bytes::<B, _>(self.opt_d.to_record())?,
        })
    }

    pub fn save(&self, run_dir: &Path) -> Result<PathBuf> {
        let dir = checkpoint_dir(run_dir, self.meta.epoch);
        save_checkpoint(&dir, &self.checkpoint_files()?)?;
        Ok(dir)
    }

    /// Restores a trainer from a checkpoint directory.
    pub fn from_checkpoint(dir: &Path, device: &B::Device) -> Result<Self> {
        let files = read_checkpoint(dir)?;
        let meta = files.meta.clone();
        let mut t = Trainer::new(&meta.generator, &meta.discriminator, &meta.train, device)?;
        t.generator = t
            .generator
            .load_record(load_record_bytes::<B, _>(files.generator, device)?);
        t.discriminator = t
            .discriminator
            .load_record(load_record_bytes::<B, _>(files.discriminator, device)?);
        t.opt_g = t.opt_g.load_record(load_record_bytes::<B, _>(files.optim_g, device)?);
        t.opt_d = t.opt_d.load_record(load_record_bytes::<B, _>(files.optim_d, device)?);
        t.meta = meta;
        Ok(t)
    }

    /// Restores the latest checkpoint of `run_dir`.
    pub fn resume(run_dir: &Path, device: &B::Device) -> Result<Self> {
        match latest_checkpoint(run_dir)? {
            Some((_, dir)) => Self::from_checkpoint(&dir, device),
            None => Err(Error::Checkpoint(format!("no checkpoint to resume under {}", run_dir.display()))),
        }
    }

    /// Runs the remaining epochs, appending to `train_log.csv`.
    pub fn fit(&mut self, data: &dyn PairSource, opts: &TrainOptions) -> Result<TrainSummary> {
        if data.is_empty() {
            return Err(Error::DataIntegrity("training set is empty".into()));
        }
        fs::create_dir_all(&opts.run_dir).map_err(|e| Error::io_path("creating run directory", &opts.run_dir, e))?;
        let log_path = opts.run_dir.join(LOG_FILE);
        let mut log = open_log(&log_path, self.meta.step)?;
        let cfg = self.meta.train.clone();
        let mut last = None;
        let mut last_checkpoint = None;
        let first_epoch = self.meta.epoch + 1;
        for epoch in first_epoch..=cfg.epochs {
            let order = epoch_order(self.meta.data_seed, epoch, data.len());
            for chunk in order.chunks(cfg.batch_size) {
                let (src, tgt) = self.batch(data, chunk)?;
                match self.train_step(src, tgt) {
                    Ok(row) => {
                        writeln!(log, "{}", row.csv_row()).map_err(|e| Error::io_path("writing", &log_path, e))?;
                        last = Some(row);
                    }
                    Err(e) => {
                        let _ = log.flush();
                        return Err(e);
                    }
                }
            }
            log.flush().map_err(|e| Error::io_path("writing", &log_path, e))?;
            self.meta.epoch = epoch;
            let halting = opts.halt_after_epoch == Some(epoch);
            if epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs || halting {
                last_checkpoint = Some(self.save(&opts.run_dir)?);
            }
            log::info!("epoch {epoch}/{} done, step {}", cfg.epochs, self.meta.step);
            if halting {
                break;
            }
        }
        Ok(TrainSummary {
            steps: self.meta.step,
            epochs_completed: self.meta.epoch,
            last,
            last_checkpoint,
            log_path,
        })
    }
}

/// Opens the log for appending after `keep_rows` rows, dropping anything past
/// them (rows from an interrupted epoch).
fn open_log(path: &Path, keep_rows: usize) -> Result<BufWriter<File>> {
    let io = |e| Error::io_path("opening training log", path, e);
    if keep_rows == 0 {
        let mut f = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(f, "{LOG_HEADER}").map_err(io)?;
        return Ok(f);
    }
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let kept: Vec<String> = reader
        .lines()
        .take(keep_rows + 1)
        .collect::<std::io::Result<_>>()
        .map_err(io)?;
    if kept.len() != keep_rows + 1 || kept[0] != LOG_HEADER {
        return Err(Error::Checkpoint(format!(
            "{} has fewer than the {keep_rows} rows recorded in the checkpoint",
            path.display()
        )));
    }
    let mut text = kept.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(io)?;
    let f = OpenOptions::new().append(true).open(path).map_err(io)?;
    Ok(BufWriter::new(f))
}

/// Trains from a manifest's training split into `opts.run_dir`, copying the
/// manifest alongside the log. Resumes when `resume` is set and a checkpoint exists.
pub fn train_from_manifest<B: AutodiffBackend>(
    manifest: &DatasetManifest,
    generator: &GeneratorConfig,
    discriminator: &DiscriminatorConfig,
    train: &TrainConfig,
    opts: &TrainOptions,
    resume: bool,
    device: &B::Device,
) -> Result<(Trainer<B>, TrainSummary)> {
    if manifest.entries(Split::Train).is_empty() {
        return Err(Error::DataIntegrity("manifest has no training samples".into()));
    }
    let mut trainer = match (resume, latest_checkpoint(&opts.run_dir)?) {
        (true, Some((_, dir))) => Trainer::from_checkpoint(&dir, device)?,
        _ => Trainer::new(generator, discriminator, train, device)?,
    };
    trainer.meta.dataset = Some(manifest.dataset.clone());
    trainer.meta.task = Some(manifest.task.to_string());
    fs::create_dir_all(&opts.run_dir).map_err(|e| Error::io_path("creating run directory", &opts.run_dir, e))?;
    let copy = opts.run_dir.join("manifest.txt");
    fs::write(&copy, manifest.to_text()).map_err(|e| Error::io_path("writing", &copy, e))?;
    let data = ManifestTrainPairs::load(manifest, trainer.config())?;
    let summary = trainer.fit(&data, opts)?;
    Ok((trainer, summary))
}

/// Mean absolute error in model space of `generator` over `data`.
pub fn mean_l1<B: Backend>(generator: &Generator<B>, data: &dyn PairSource, device: &B::Device) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.len() {
        let (s, t) = data.pair(i)?;
        let src = images_to_tensor::<B>(std::slice::from_ref(&s), device);
        let tgt = images_to_tensor::<B>(std::slice::from_ref(&t), device);
        let out = generator.forward(src)?;
        total += l1_loss(out, tgt)?.into_scalar().elem::<f64>();
    }
    Ok(total / data.len() as f64)
}

/// Inference copy of an autodiff generator.
pub fn inference_generator<B: AutodiffBackend>(g: &Generator<B>) -> Generator<B::InnerBackend> {
    g.valid()
}
