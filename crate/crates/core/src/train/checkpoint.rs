//! On-disk checkpoints: one directory per saved epoch.
//!
//! ```text
//! checkpoints/epoch_<n>/
//!   meta.json            epoch, step counter, configs
//!   generator.mpk        named MessagePack records, full precision
//!   discriminator.mpk
//!   optim_g.mpk
//!   optim_d.mpk
//! ```
//!
//! A directory is assembled under a temporary name and renamed into place,
//! so a crash never leaves a half-written `epoch_<n>`.

use std::fs;
use std::path::{Path, PathBuf};

use burn::module::Module;
use burn::prelude::*;
use burn::record::{FullPrecisionSettings, NamedMpkBytesRecorder, Record, Recorder};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};

pub const META_FILE: &str = "meta.json";
pub const GENERATOR_FILE: &str = "generator.mpk";
pub const DISCRIMINATOR_FILE: &str = "discriminator.mpk";
pub const OPTIM_G_FILE: &str = "optim_g.mpk";
pub const OPTIM_D_FILE: &str = "optim_d.mpk";

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: u32,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub step: usize,
    pub last_finite_step: Option<usize>,
    /// Epoch `e` shuffles with ChaCha8 seeded by this value on stream `e`.
    pub data_seed: u64,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    /// Dataset label of the training manifest, when known.
    pub dataset: Option<String>,
    /// Task of the training manifest, e.g. `T1->T2`.
    pub task: Option<String>,
}

impl CheckpointMeta {
    pub fn new(
        generator: GeneratorConfig,
        discriminator: DiscriminatorConfig,
        train: TrainConfig,
    ) -> Self {
        CheckpointMeta {
            format: FORMAT_VERSION,
            epoch: 0,
            step: 0,
            last_finite_step: None,
            data_seed: train.seed,
            generator,
            discriminator,
            train,
            dataset: None,
            task: None,
        }
    }
}

fn recorder() -> NamedMpkBytesRecorder<FullPrecisionSettings> {
    NamedMpkBytesRecorder::<FullPrecisionSettings>::default()
}

pub fn record_bytes<B: Backend, R: Record<B>>(record: R) -> Result<Vec<u8>> {
    recorder()
        .record(record, ())
        .map_err(|e| Error::Checkpoint(format!("serializing record: {e}")))
}

pub fn load_record_bytes<B: Backend, R: Record<B>>(bytes: Vec<u8>, device: &B::Device) -> Result<R> {
    recorder()
        .load(bytes, device)
        .map_err(|e| Error::Checkpoint(format!("deserializing record: {e}")))
}

pub fn checkpoint_dir(run_dir: &Path, epoch: usize) -> PathBuf {
    run_dir.join("checkpoints").join(format!("epoch_{epoch}"))
}

/// Files of one checkpoint, serialized.
pub struct CheckpointFiles {
    pub meta: CheckpointMeta,
    pub generator: Vec<u8>,
    pub discriminator: Vec<u8>,
    pub optim_g: Vec<u8>,
    pub optim_d: Vec<u8>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io_path("writing", path, e))
}

/// Writes `files` to `dir` atomically (temp directory, then rename).
pub fn save_checkpoint(dir: &Path, files: &CheckpointFiles) -> Result<()> {
    let parent = dir
        .parent()
        .ok_or_else(|| Error::Checkpoint(format!("{} has no parent directory", dir.display())))?;
    fs::create_dir_all(parent).map_err(|e| Error::io_path("creating", parent, e))?;
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = parent.join(format!(".{name}.partial"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io_path("removing", &tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io_path("creating", &tmp, e))?;
    let meta = serde_json::to_string_pretty(&files.meta)
        .map_err(|e| Error::Checkpoint(format!("serializing metadata: {e}")))?;
    write(&tmp.join(META_FILE), meta.as_bytes())?;
    write(&tmp.join(GENERATOR_FILE), &files.generator)?;
    write(&tmp.join(DISCRIMINATOR_FILE), &files.discriminator)?;
    write(&tmp.join(OPTIM_G_FILE), &files.optim_g)?;
    write(&tmp.join(OPTIM_D_FILE), &files.optim_d)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io_path("replacing", dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io_path("finalizing", dir, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io_path("reading checkpoint file", path, e))
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io_path("reading checkpoint", &path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if meta.format != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported format {}",
            path.display(),
            meta.format
        )));
    }
    Ok(meta)
}

pub fn read_checkpoint(dir: &Path) -> Result<CheckpointFiles> {
    Ok(CheckpointFiles {
        meta: read_meta(dir)?,
        generator: read(&dir.join(GENERATOR_FILE))?,
        discriminator: read(&dir.join(DISCRIMINATOR_FILE))?,
        optim_g: read(&dir.join(OPTIM_G_FILE))?,
        optim_d: read(&dir.join(OPTIM_D_FILE))?,
    })
}

/// Highest-numbered complete checkpoint under `run_dir/checkpoints`.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<(usize, PathBuf)>> {
    let root = run_dir.join("checkpoints");
    if !root.exists() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(&root).map_err(|e| Error::io_path("listing", &root, e))? {
        let entry = entry.map_err(|e| Error::io_path("listing", &root, e))?;
        let name = entry.file_name();
        let Some(n) = name.to_str().and_then(|s| s.strip_prefix("epoch_")).and_then(|s| s.parse().ok()) else {
            continue;
        };
        if !entry.path().join(META_FILE).exists() {
            continue;
        }
        if best.as_ref().map_or(true, |(b, _)| n > *b) {
            best = Some((n, entry.path()));
        }
    }
    Ok(best)
}

/// Accepts either a checkpoint directory or a run directory (latest checkpoint).
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join(META_FILE).exists() {
        return Ok(path.to_path_buf());
    }
    match latest_checkpoint(path)? {
        Some((_, dir)) => Ok(dir),
        None => Err(Error::Checkpoint(format!(
            "{} is neither a checkpoint nor a run directory with checkpoints",
            path.display()
        ))),
    }
}

/// Generator weights of a checkpoint, for inference on any backend.
pub fn load_generator<B: Backend>(path: &Path, device: &B::Device) -> Result<(Generator<B>, CheckpointMeta)> {
    let dir = resolve_checkpoint(path)?;
    let meta = read_meta(&dir)?;
    let bytes = read(&dir.join(GENERATOR_FILE))?;
    let g = Generator::<B>::new(&meta.generator, 0, device)?;
    let record = load_record_bytes::<B, _>(bytes, device)?;
    Ok((g.load_record(record), meta))
}

pub fn load_discriminator<B: Backend>(path: &Path, device: &B::Device) -> Result<Discriminator<B>> {
    let dir = resolve_checkpoint(path)?;
    let meta = read_meta(&dir)?;
    let bytes = read(&dir.join(DISCRIMINATOR_FILE))?;
    let d = Discriminator::<B>::new(&meta.discriminator, 0, device)?;
    let record = load_record_bytes::<B, _>(bytes, device)?;
    Ok(d.load_record(record))
}
