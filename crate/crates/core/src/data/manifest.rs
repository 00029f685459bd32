use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::slab::Slab25D;
use super::volume::Task;
use crate::error::{Error, Result};

const HEADER: &str = "# mritrans dataset manifest v1";

/// An in-memory source/target slab pair.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub source: Slab25D,
    pub target: Slab25D,
    pub task: Task,
}

impl PairedSample {
    pub fn new(source: Slab25D, target: Slab25D, task: Task) -> Result<Self> {
        let (s, t) = (&source.source, &target.source);
        if s.patient_id != t.patient_id {
            return Err(Error::DataIntegrity(format!(
                "pair mixes patients {} and {}",
                s.patient_id, t.patient_id
            )));
        }
        if s.center != t.center {
            return Err(Error::DataIntegrity(format!(
                "{}: source centre {} differs from target centre {}",
                s.patient_id, s.center, t.center
            )));
        }
        if source.pixels.dim() != target.pixels.dim() {
            return Err(Error::DataIntegrity(format!(
                "{}: source and target slabs differ in size",
                s.patient_id
            )));
        }
        if s.modality != task.source || t.modality != task.target {
            return Err(Error::DataIntegrity(format!(
                "{}: slabs {}->{} do not match task {task}",
                s.patient_id, s.modality, t.modality
            )));
        }
        Ok(PairedSample {
            source,
            target,
            task,
        })
    }
}

/// One manifest line: a paired sample stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleEntry {
    pub id: String,
    pub center: usize,
    /// Paths relative to the manifest's directory.
    pub source: PathBuf,
    pub target: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Reproducible record of train/test membership.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub task: Task,
    /// Free-form dataset label, used to flag cross-dataset evaluation.
    pub dataset: String,
    pub split_ratio: f64,
    pub seed: u64,
    pub few_shot_cap: Option<usize>,
    pub train: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
    /// Directory that entry paths are relative to. Not serialized.
    pub base_dir: PathBuf,
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    Ok(())
}

/// Number of training samples for `n` samples at `ratio`.
///
/// `round(ratio * n)`, kept within `1..=n-1` so both sides are populated
/// whenever there are at least two samples.
pub fn train_count(n: usize, ratio: f64) -> usize {
    let k = (ratio * n as f64).round() as usize;
    if n >= 2 {
        k.clamp(1, n - 1)
    } else {
        n
    }
}

fn seeded_subset(mut entries: Vec<SampleEntry>, cap: usize, seed: u64) -> Vec<SampleEntry> {
    if entries.len() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f3e5_0000_0001);
        entries.shuffle(&mut rng);
        entries.truncate(cap);
        entries.sort_by(|a, b| a.id.cmp(&b.id));
    }
    entries
}

/// Randomly partitions `entries` into train and test lists.
///
/// Entries are sorted by id before shuffling, so the result depends only on
/// the set of entries, `ratio` and `seed`. `few_shot_cap` truncates the
/// training list to a seeded random subset and leaves the test list alone.
pub fn split_dataset(
    mut entries: Vec<SampleEntry>,
    ratio: f64,
    seed: u64,
    few_shot_cap: Option<usize>,
    task: Task,
    dataset: impl Into<String>,
) -> Result<DatasetManifest> {
    check_ratio(ratio)?;
    if entries.is_empty() {
        return Err(Error::DataIntegrity("cannot split an empty sample list".into()));
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::DataIntegrity(format!("duplicate sample id {}", w[0].id)));
    }

    let n_train = train_count(entries.len(), ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    entries.shuffle(&mut rng);
    let mut test = entries.split_off(n_train);
    let mut train = entries;
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(cap) = few_shot_cap {
        train = seeded_subset(train, cap, seed);
    }

    Ok(DatasetManifest {
        task,
        dataset: dataset.into(),
        split_ratio: ratio,
        seed,
        few_shot_cap,
        train,
        test,
        base_dir: PathBuf::new(),
    })
}

fn path_str(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl DatasetManifest {
    pub fn entries(&self, split: Split) -> &[SampleEntry] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// Returns a copy whose training list is capped at `cap` samples.
    pub fn with_few_shot_cap(&self, cap: usize) -> DatasetManifest {
        let mut m = self.clone();
        m.train = seeded_subset(m.train, cap, m.seed);
        m.few_shot_cap = Some(self.few_shot_cap.map_or(cap, |c| c.min(cap)));
        m
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "task = {}", self.task);
        let _ = writeln!(s, "dataset = {}", self.dataset);
        let _ = writeln!(s, "split_ratio = {}", self.split_ratio);
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.few_shot_cap {
            Some(c) => {
                let _ = writeln!(s, "few_shot_cap = {c}");
            }
            None => {
                let _ = writeln!(s, "few_shot_cap = none");
            }
        }
        for (split, list) in [(Split::Train, &self.train), (Split::Test, &self.test)] {
            for e in list {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}",
                    split.as_str(),
                    e.id,
                    e.center,
                    path_str(&e.source),
                    path_str(&e.target)
                );
            }
        }
        s
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::DataIntegrity(format!("manifest line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(bad(1, "missing manifest header")),
        }

        let mut task = None;
        let mut dataset = None;
        let mut ratio = None;
        let mut seed = None;
        let mut cap = None;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once(" = ") {
                let value = value.trim();
                match key.trim() {
                    "task" => task = Some(value.parse::<Task>()?),
                    "dataset" => dataset = Some(value.to_string()),
                    "split_ratio" => {
                        ratio = Some(value.parse::<f64>().map_err(|_| bad(n, "bad split_ratio"))?)
                    }
                    "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(n, "bad seed"))?),
                    "few_shot_cap" => {
                        cap = Some(if value == "none" {
                            None
                        } else {
                            Some(value.parse::<usize>().map_err(|_| bad(n, "bad few_shot_cap"))?)
                        })
                    }
                    other => return Err(bad(n, &format!("unknown key {other:?}"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(bad(n, "expected 5 tab-separated fields"));
            }
            let entry = SampleEntry {
                id: fields[1].to_string(),
                center: fields[2].parse().map_err(|_| bad(n, "bad centre index"))?,
                source: PathBuf::from(fields[3]),
                target: PathBuf::from(fields[4]),
            };
            match fields[0] {
                "train" => train.push(entry),
                "test" => test.push(entry),
                other => return Err(bad(n, &format!("unknown split {other:?}"))),
            }
        }

        let missing = |k: &str| Error::DataIntegrity(format!("manifest lacks `{k}`"));
        let manifest = DatasetManifest {
            task: task.ok_or_else(|| missing("task"))?,
            dataset: dataset.ok_or_else(|| missing("dataset"))?,
            split_ratio: ratio.ok_or_else(|| missing("split_ratio"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            few_shot_cap: cap.ok_or_else(|| missing("few_shot_cap"))?,
            train,
            test,
            base_dir: base_dir.to_path_buf(),
        };
        if let Some(e) = manifest
            .train
            .iter()
            .find(|e| manifest.test.iter().any(|t| t.id == e.id))
        {
            return Err(Error::DataIntegrity(format!(
                "sample {} appears in both train and test",
                e.id
            )));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io_path("creating", parent, e))?;
        }
        std::fs::write(path, self.to_text()).map_err(|e| Error::io_path("writing", path, e))
    }

    /// Reads a manifest; entry paths resolve against the file's directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io_path("reading manifest", path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        DatasetManifest::parse(&text, base)
    }
}
