//! Scoring translators on the test side of a manifest.

use std::path::{Path, PathBuf};

use burn::prelude::*;
use ndarray::Array3;

use crate::data::slab::save_rgb_png;
use crate::data::{images_to_tensor, load_pair_images, tensor_to_images, DatasetManifest, Resolution, Split};
use crate::error::{Error, Result};
use crate::metrics::report::score_pair;
use crate::metrics::{eval_scales, LpipsBackend, MetricReport, SsimParams};
use crate::model::Generator;
use crate::train::checkpoint::{load_generator, resolve_checkpoint, CheckpointMeta};

/// Anything that maps an 8-bit source slab to an 8-bit prediction.
pub trait Translator {
    fn translate(&self, source: &Array3<u8>) -> Result<Array3<u8>>;
}

/// Returns its input. Used to probe the harness.
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, source: &Array3<u8>) -> Result<Array3<u8>> {
        Ok(source.clone())
    }
}

/// A generator in inference mode.
pub struct GeneratorTranslator<B: Backend> {
    pub generator: Generator<B>,
    pub device: B::Device,
}

impl<B: Backend> Translator for GeneratorTranslator<B> {
    fn translate(&self, source: &Array3<u8>) -> Result<Array3<u8>> {
        let x = images_to_tensor::<B>(std::slice::from_ref(source), &self.device);
        let y = self.generator.forward(x)?;
        Ok(tensor_to_images(y).remove(0))
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub resolution: Resolution,
    pub lpips: Option<LpipsBackend>,
    /// Write each prediction as `<id>.png` here.
    pub save_images: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            resolution: Resolution::R256,
            lpips: None,
            save_images: None,
        }
    }
}

/// Where the model came from, for the report notes.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub checkpoint: Option<PathBuf>,
    pub trained_dataset: Option<String>,
    pub trained_task: Option<String>,
    pub trained_resolution: Option<Resolution>,
}

impl Provenance {
    pub fn from_meta(dir: &Path, meta: &CheckpointMeta) -> Self {
        Provenance {
            checkpoint: Some(dir.to_path_buf()),
            trained_dataset: meta.dataset.clone(),
            trained_task: meta.task.clone(),
            trained_resolution: Some(meta.train.resolution),
        }
    }

    /// True when the model was trained on another dataset than `manifest`.
    pub fn is_zero_shot(&self, manifest: &DatasetManifest) -> bool {
        self.trained_dataset.as_deref().is_some_and(|d| d != manifest.dataset)
    }

    fn notes(&self, manifest: &DatasetManifest, resolution: Resolution) -> Vec<String> {
        let mut notes = Vec::new();
        if let Some(c) = &self.checkpoint {
            notes.push(format!("checkpoint: {}", c.display()));
        }
        notes.push(format!(
            "evaluated on: dataset {} task {} ({} test pairs) at {}",
            manifest.dataset,
            manifest.task,
            manifest.test.len(),
            resolution.size()
        ));
        if self.is_zero_shot(manifest) {
            notes.push(format!(
                "zero-shot: trained on dataset {}, evaluated on {} without retraining",
                self.trained_dataset.as_deref().unwrap_or("?"),
                manifest.dataset
            ));
        }
        if let Some(t) = &self.trained_task {
            if *t != manifest.task.to_string() {
                let w = format!("warning: checkpoint task {t} differs from manifest task {}", manifest.task);
                log::warn!("{w}");
                notes.push(w);
            }
        }
        if let Some(r) = self.trained_resolution {
            if r != resolution {
                notes.push(format!("note: trained at {}, evaluated at {}", r.size(), resolution.size()));
            }
        }
        notes
    }
}

/// Runs `model` over every test pair of `manifest` and scores the outputs.
/// Only the test list is read.
pub fn evaluate(
    model: &dyn Translator,
    manifest: &DatasetManifest,
    opts: &EvalOptions,
    provenance: &Provenance,
) -> Result<MetricReport> {
    let n = manifest.test.len();
    if n == 0 {
        return Err(Error::DataIntegrity("manifest has no test samples".into()));
    }
    let params = SsimParams::default();
    let scales = eval_scales(&params, opts.resolution.size());
    if let Some(dir) = &opts.save_images {
        std::fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let (id, src, tgt) = load_pair_images(manifest, Split::Test, i, opts.resolution)?;
        let out = model.translate(&src)?;
        if let Some(dir) = &opts.save_images {
            save_rgb_png(out.view(), &dir.join(format!("{id}.png")))?;
        }
        rows.push(score_pair(&id, out.view(), tgt.view(), &params, scales, opts.lpips.as_ref())?);
    }
    let mut report = MetricReport::from_samples(rows)?;
    report.notes = provenance.notes(manifest, opts.resolution);
    if scales < params.ms_weights.len() {
        report
            .notes
            .push(format!("ms_ssim uses {scales} scales with renormalized weights at this size"));
    }
    Ok(report)
}

/// Loads the generator of a checkpoint (or a run's latest) and evaluates it.
pub fn evaluate_checkpoint<B: Backend>(
    checkpoint: &Path,
    manifest: &DatasetManifest,
    opts: &EvalOptions,
    device: &B::Device,
) -> Result<MetricReport> {
    let dir = resolve_checkpoint(checkpoint)?;
    let (generator, meta) = load_generator::<B>(&dir, device)?;
    meta.generator.check_input_size(opts.resolution.size())?;
    let model = GeneratorTranslator {
        generator,
        device: device.clone(),
    };
    evaluate(&model, manifest, opts, &Provenance::from_meta(&dir, &meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::slab::save_rgb_png;
    use crate::data::{SampleEntry, Task};
    use crate::metrics::Metric;

    pub(crate) fn tiny_manifest(dir: &Path, dataset: &str, n_test: usize, same: bool) -> DatasetManifest {
        let mut test = Vec::new();
        for k in 0..n_test {
            let img = Array3::from_shape_fn((512, 512, 3), |(y, x, c)| ((x + 2 * y + 60 * c + 17 * k) % 256) as u8);
            let tgt = if same { img.clone() } else { img.mapv(|v| v / 2) };
            let (s, t) = (format!("p{k}_T1.png"), format!("p{k}_T2.png"));
            save_rgb_png(img.view(), &dir.join(&s)).unwrap();
            save_rgb_png(tgt.view(), &dir.join(&t)).unwrap();
            test.push(SampleEntry {
                id: format!("p{k}"),
                center: 1,
                source: s.into(),
                target: t.into(),
            });
        }
        DatasetManifest {
            task: "T1->T2".parse::<Task>().unwrap(),
            dataset: dataset.into(),
            split_ratio: 0.8,
            seed: 0,
            few_shot_cap: None,
            train: Vec::new(),
            test,
            base_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn identity_on_equal_pairs_is_infinite_psnr() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path(), "synthetic", 3, true);
        let opts = EvalOptions { resolution: Resolution::R128, ..Default::default() };
        let r = evaluate(&IdentityTranslator, &m, &opts, &Provenance::default()).unwrap();
        assert_eq!(r.per_sample.len(), 3);
        assert!(r.per_sample.iter().all(|s| s.psnr == f64::INFINITY));
        let s = r.summary(Metric::Psnr);
        assert_eq!((s.n, s.excluded), (0, 3));
        assert!(r.summary(Metric::Lpips).mean.is_none());
    }

    #[test]
    fn zero_shot_is_noted() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path(), "ixi", 2, false);
        let prov = Provenance {
            trained_dataset: Some("brats".into()),
            trained_task: Some("T1->T2".into()),
            ..Default::default()
        };
        let opts = EvalOptions { resolution: Resolution::R128, ..Default::default() };
        let r = evaluate(&IdentityTranslator, &m, &opts, &prov).unwrap();
        assert!(r.notes.iter().any(|n| n.starts_with("zero-shot: trained on dataset brats")));
        assert!(r.per_sample.iter().all(|s| s.psnr.is_finite()));
        assert!(r.notes.iter().any(|n| n.contains("4 scales")));
    }

    #[test]
    fn task_mismatch_warns_but_proceeds() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path(), "brats", 1, false);
        let prov = Provenance {
            trained_task: Some("T2->T1".into()),
            ..Default::default()
        };
        let r = evaluate(&IdentityTranslator, &m, &EvalOptions::default(), &prov).unwrap();
        assert!(r.notes.iter().any(|n| n.starts_with("warning: checkpoint task")));
    }

    #[test]
    fn empty_test_side_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path(), "x", 0, true);
        assert!(evaluate(&IdentityTranslator, &m, &EvalOptions::default(), &Provenance::default()).is_err());
    }
}
