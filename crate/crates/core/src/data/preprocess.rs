//! Volume tree -> paired 2.5D slab tree + manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::manifest::{split_dataset, DatasetManifest, SampleEntry, Split};
use super::slab::{build_slab, default_center, save_rgb_png};
use super::volume::{discover_volumes, Modality, ModalityPatterns, Task, VolumeCandidate, VolumeRecord};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ANOMALY_FILE: &str = "anomalies.log";
const STAGING_DIR: &str = ".staging";

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub volume_root: PathBuf,
    pub out_root: PathBuf,
    pub patterns: ModalityPatterns,
    pub task: Task,
    pub split_ratio: f64,
    pub seed: u64,
    pub few_shot_cap: Option<usize>,
    /// Dataset label stored in the manifest; defaults to the volume root's name.
    pub dataset: Option<String>,
}

/// A patient or volume that was skipped, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anomaly {
    pub patient_id: String,
    pub modality: Option<Modality>,
    pub path: Option<PathBuf>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PreprocessSummary {
    pub manifest_path: PathBuf,
    pub anomaly_log: PathBuf,
    pub manifest: DatasetManifest,
    pub anomalies: Vec<Anomaly>,
}

fn slab_file(patient: &str, modality: &Modality) -> String {
    format!("{patient}_{}.png", modality.tag())
}

fn build_pair(
    patient: &str,
    src: &VolumeCandidate,
    tgt: &VolumeCandidate,
    staging: &Path,
) -> std::result::Result<usize, Anomaly> {
    let fail = |c: &VolumeCandidate, reason: String| Anomaly {
        patient_id: patient.to_string(),
        modality: Some(c.modality.clone()),
        path: Some(c.path.clone()),
        reason,
    };
    let src_rec =
        VolumeRecord::probe(patient, src.modality.clone(), &src.path).map_err(|e| fail(src, e.to_string()))?;
    let tgt_rec =
        VolumeRecord::probe(patient, tgt.modality.clone(), &tgt.path).map_err(|e| fail(tgt, e.to_string()))?;
    if src_rec.depth() != tgt_rec.depth() {
        return Err(fail(
            tgt,
            format!(
                "depth {} differs from source depth {}",
                tgt_rec.depth(),
                src_rec.depth()
            ),
        ));
    }
    let center = default_center(src_rec.depth()).map_err(|e| fail(src, e.to_string()))?;
    for (rec, cand) in [(&src_rec, src), (&tgt_rec, tgt)] {
        let slab = build_slab(rec, center).map_err(|e| fail(cand, e.to_string()))?;
        let out = staging.join(patient).join(slab_file(patient, &rec.modality));
        save_rgb_png(slab.pixels.view(), &out).map_err(|e| fail(cand, e.to_string()))?;
    }
    Ok(center)
}

/// Discovers volumes, builds one central slab per volume for the task's two
/// modalities, splits patients, and writes
/// `<out>/{train,test}/<patient>/<patient>_<MOD>.png`, `<out>/manifest.txt`
/// and `<out>/anomalies.log`.
///
/// Volumes that fail to read are logged and skipped. Matching zero volumes,
/// or ending with zero usable pairs, is an error.
pub fn run_preprocess(opts: &PreprocessOptions) -> Result<PreprocessSummary> {
    let candidates = discover_volumes(&opts.volume_root, &opts.patterns)?;
    if candidates.is_empty() {
        let mut msg = format!(
            "no volumes under {} matched any modality pattern:",
            opts.volume_root.display()
        );
        for (m, re) in opts.patterns.iter() {
            let _ = write!(msg, " {m}={}", re.as_str());
        }
        return Err(Error::DataIntegrity(msg));
    }

    let mut by_patient: BTreeMap<String, BTreeMap<Modality, Vec<VolumeCandidate>>> = BTreeMap::new();
    for c in candidates {
        by_patient
            .entry(c.patient_id.clone())
            .or_default()
            .entry(c.modality.clone())
            .or_default()
            .push(c);
    }

    std::fs::create_dir_all(&opts.out_root)
        .map_err(|e| Error::io_path("creating", &opts.out_root, e))?;
    let staging = opts.out_root.join(STAGING_DIR);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io_path("clearing", &staging, e))?;
    }

    let mut anomalies = Vec::new();
    let mut entries = Vec::new();
    for (patient, mods) in &by_patient {
        let pick = |m: &Modality| -> std::result::Result<&VolumeCandidate, String> {
            match mods.get(m).map(Vec::as_slice) {
                Some([one]) => Ok(one),
                Some(many) if many.len() > 1 => Err(format!("{} {m} volumes match", many.len())),
                _ => Err(format!("no {m} volume")),
            }
        };
        let (src, tgt) = match (pick(&opts.task.source), pick(&opts.task.target)) {
            (Ok(s), Ok(t)) => (s, t),
            (Err(reason), _) | (_, Err(reason)) => {
                anomalies.push(Anomaly {
                    patient_id: patient.clone(),
                    modality: None,
                    path: None,
                    reason,
                });
                continue;
            }
        };
        match build_pair(patient, src, tgt, &staging) {
            Ok(center) => entries.push(SampleEntry {
                id: patient.clone(),
                center,
                source: PathBuf::from(patient).join(slab_file(patient, &src.modality)),
                target: PathBuf::from(patient).join(slab_file(patient, &tgt.modality)),
            }),
            Err(a) => {
                log::warn!("skipping {}: {}", a.patient_id, a.reason);
                anomalies.push(a);
            }
        }
    }

    let anomaly_log = opts.out_root.join(ANOMALY_FILE);
    write_anomalies(&anomaly_log, &anomalies)?;
    if entries.is_empty() {
        return Err(Error::DataIntegrity(format!(
            "no usable {} pairs; see {}",
            opts.task,
            anomaly_log.display()
        )));
    }

    let dataset = opts.dataset.clone().unwrap_or_else(|| {
        opts.volume_root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let mut manifest = split_dataset(
        entries,
        opts.split_ratio,
        opts.seed,
        None,
        opts.task.clone(),
        dataset,
    )?;

    // Move staged slabs into their split directory; entry paths become
    // relative to the output root.
    for split in [Split::Train, Split::Test] {
        let dir = opts.out_root.join(split.as_str());
        let list = match split {
            Split::Train => &mut manifest.train,
            Split::Test => &mut manifest.test,
        };
        for e in list.iter_mut() {
            let to = dir.join(&e.id);
            if to.exists() {
                std::fs::remove_dir_all(&to).map_err(|err| Error::io_path("replacing", &to, err))?;
            }
            std::fs::create_dir_all(&dir).map_err(|err| Error::io_path("creating", &dir, err))?;
            let from = staging.join(&e.id);
            std::fs::rename(&from, &to).map_err(|err| Error::io_path("moving", &from, err))?;
            e.source = PathBuf::from(split.as_str()).join(&e.source);
            e.target = PathBuf::from(split.as_str()).join(&e.target);
        }
    }
    let _ = std::fs::remove_dir_all(&staging);

    // The few-shot cap applies after placement so capped-out training slabs
    // stay on disk.
    if let Some(cap) = opts.few_shot_cap {
        manifest = manifest.with_few_shot_cap(cap);
    }
    manifest.base_dir = opts.out_root.clone();
    let manifest_path = opts.out_root.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;

    Ok(PreprocessSummary {
        manifest_path,
        anomaly_log,
        manifest,
        anomalies,
    })
}

fn write_anomalies(path: &Path, anomalies: &[Anomaly]) -> Result<()> {
    let mut s = String::from("patient\tmodality\tpath\treason\n");
    for a in anomalies {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            a.patient_id,
            a.modality.as_ref().map(|m| m.tag().to_string()).unwrap_or_default(),
            a.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            a.reason.replace(['\t', '\n'], " ")
        );
    }
    std::fs::write(path, s).map_err(|e| Error::io_path("writing", path, e))
}
