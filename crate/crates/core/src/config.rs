//! Run configuration: one TOML file of flat dotted keys, plus overrides.
//!
//! ```toml
//! data.task = "T1->T2"
//! generator.encoder = "se_residual"
//! train.epochs = 200
//! train.loss.lambda1 = 100.0
//! ```
//!
//! Values resolve as override > file > default. Keys that no section knows
//! are rejected by name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{ModalityPatterns, Modality, Resolution, Task};
use crate::error::{Error, Result};
use crate::model::{DiscriminatorConfig, GeneratorConfig};
use crate::train::TrainConfig;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub task: Task,
    pub split_ratio: f64,
    pub seed: u64,
    pub few_shot_cap: Option<usize>,
    /// Dataset label written into manifests.
    pub dataset: Option<String>,
    /// Manifest used by `train`, `evaluate`, `ablate` and `figures`.
    pub manifest: Option<PathBuf>,
    /// Modality tag -> filename regex; replaces the built-in set when nonempty.
    pub patterns: BTreeMap<String, String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            task: Task::new(Modality::T1, Modality::T2),
            split_ratio: 0.8,
            seed: 0,
            few_shot_cap: None,
            dataset: None,
            manifest: None,
            patterns: BTreeMap::new(),
        }
    }
}

impl DataConfig {
    pub fn modality_patterns(&self) -> Result<ModalityPatterns> {
        if self.patterns.is_empty() {
            return Ok(ModalityPatterns::defaults());
        }
        let pairs: Vec<(Modality, &str)> = self
            .patterns
            .iter()
            .map(|(tag, re)| Ok((tag.parse::<Modality>()?, re.as_str())))
            .collect::<Result<_>>()?;
        ModalityPatterns::new(&pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapScaling {
    #[default]
    PerImage,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Defaults to the training resolution.
    pub resolution: Option<Resolution>,
    /// External perceptual scorer command line.
    pub lpips: Option<String>,
    pub save_images: bool,
    pub heatmap_scale: HeatmapScaling,
    /// Test samples drawn by `figures`.
    pub figure_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            resolution: None,
            lpips: None,
            save_images: false,
            heatmap_scale: HeatmapScaling::PerImage,
            figure_samples: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Where the values came from. Not part of the key space.
    #[serde(skip)]
    pub provenance: ConfigProvenance,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            provenance: ConfigProvenance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigProvenance {
    pub file: Option<PathBuf>,
    /// `key=value` strings, in application order.
    pub overrides: Vec<String>,
}

// Keys whose default is absent, so they do not show up when the defaults
// are serialized.
const OPTIONAL_KEYS: &[&str] = &[
    "data.few_shot_cap",
    "data.dataset",
    "data.manifest",
    "train.ms_ssim_scales",
    "eval.resolution",
    "eval.lpips",
];
const OPEN_PREFIXES: &[&str] = &["data.patterns."];

fn flatten_into(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten_into(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

/// Leaf keys of `table` as dotted paths, in table order.
pub fn flatten(table: &Table) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    flatten_into("", table, &mut out);
    out
}

fn known_keys() -> BTreeSet<String> {
    let defaults = Table::try_from(RunConfig::default()).expect("defaults serialize");
    let mut keys: BTreeSet<String> = flatten(&defaults).into_iter().map(|(k, _)| k).collect();
    keys.extend(OPTIONAL_KEYS.iter().map(|k| k.to_string()));
    keys
}

fn check_key(key: &str, known: &BTreeSet<String>) -> Result<()> {
    if known.contains(key) || OPEN_PREFIXES.iter().any(|p| key.starts_with(p) && key.len() > p.len()) {
        return Ok(());
    }
    Err(Error::Config(format!("unknown config key `{key}`")))
}

/// `s` as a TOML string literal, for override values that must stay strings.
pub fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(Error::Config(format!("expected KEY=VALUE, got `{s}`"))),
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| Error::Config(format!("empty config key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("config key `{key}`: `{p}` is not a section"))),
        };
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses config text, rejecting unknown keys.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("config: {e}")))?;
        Self::from_table(table)
    }

    fn from_table(table: Table) -> Result<Self> {
        let known = known_keys();
        for (k, _) in flatten(&table) {
            check_key(&k, &known)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Defaults, overlaid with `file` (if any), overlaid with `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io_path("reading config", p, e))?;
                let t: Table = text.parse().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                t
            }
            None => Table::new(),
        };
        let known = known_keys();
        for (k, v) in overrides {
            check_key(k, &known)?;
            set_path(&mut table, k, parse_value(v))?;
        }
        let mut cfg = Self::from_table(table).map_err(|e| match (e, file) {
            (Error::Config(m), Some(p)) => Error::Config(format!("{} (from {})", m, p.display())),
            (e, _) => e,
        })?;
        cfg.provenance = ConfigProvenance {
            file: file.map(Path::to_path_buf),
            overrides: overrides.iter().map(|(k, v)| format!("{k}={v}")).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.train.validate()?;
        self.generator.check_input_size(self.eval_resolution().size())?;
        self.generator.check_input_size(self.train.resolution.size())?;
        if !(self.data.split_ratio > 0.0 && self.data.split_ratio < 1.0) {
            return Err(Error::Config(format!("data.split_ratio must lie in (0, 1), got {}", self.data.split_ratio)));
        }
        self.data.modality_patterns().map(|_| ())
    }

    pub fn eval_resolution(&self) -> Resolution {
        self.eval.resolution.unwrap_or(self.train.resolution)
    }

    /// Flat `key = value` text; parses back to an equal config.
    pub fn to_toml(&self) -> String {
        let table = Table::try_from(self).expect("config serializes");
        let mut s = String::new();
        if let Some(f) = &self.provenance.file {
            s.push_str(&format!("# file: {}\n", f.display()));
        }
        for o in &self.provenance.overrides {
            s.push_str(&format!("# override: {o}\n"));
        }
        for (k, v) in flatten(&table) {
            s.push_str(&format!("{} = {}\n", dotted(&k), v));
        }
        s
    }

    /// Writes the frozen copy `config.toml` into `dir`.
    pub fn write_frozen(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;
        let p = dir.join(CONFIG_FILE);
        std::fs::write(&p, self.to_toml()).map_err(|e| Error::io_path("writing", &p, e))?;
        Ok(p)
    }
}

// Quotes path segments that are not bare TOML keys (e.g. `FLAIR` is fine, `T1-ce` is not).
fn dotted(key: &str) -> String {
    key.split('.')
        .map(|p| {
            if !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                p.to_string()
            } else {
                format!("{:?}", p)
            }
        })
        .collect::<Vec<_>>()
        .join(".")
}
