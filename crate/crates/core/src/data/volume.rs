use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array3, Ix3};
use nifti::{IntoNdArray, NiftiObject, ReaderOptions};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MRI contrast of a volume.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    T1,
    T2,
    Flair,
    Pd,
    Other(String),
}

impl Modality {
    pub fn tag(&self) -> &str {
        match self {
            Modality::T1 => "T1",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
            Modality::Pd => "PD",
            Modality::Other(tag) => tag,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty modality tag".into()));
        }
        if s.chars().any(|c| c.is_whitespace() || c == '/' || c == '>') {
            return Err(Error::Config(format!("invalid modality tag {s:?}")));
        }
        Ok(match s.to_ascii_uppercase().as_str() {
            "T1" => Modality::T1,
            "T2" => Modality::T2,
            "FLAIR" => Modality::Flair,
            "PD" => Modality::Pd,
            _ => Modality::Other(s.to_string()),
        })
    }
}

impl Serialize for Modality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Modality {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A translation direction, e.g. `T1->T2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Task {
    pub source: Modality,
    pub target: Modality,
}

impl Task {
    pub fn new(source: Modality, target: Modality) -> Self {
        Task { source, target }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("->")
            .ok_or_else(|| Error::Config(format!("task {s:?} is not of the form SRC->DST")))?;
        Ok(Task::new(a.parse()?, b.parse()?))
    }
}

impl Serialize for Task {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Task {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One 3D volume on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeRecord {
    pub patient_id: String,
    pub modality: Modality,
    pub path: PathBuf,
    /// Voxel counts `(nx, ny, nz)`.
    pub shape: (usize, usize, usize),
}

impl VolumeRecord {
    pub fn new(
        patient_id: impl Into<String>,
        modality: Modality,
        path: impl Into<PathBuf>,
        shape: (usize, usize, usize),
    ) -> Result<Self> {
        let patient_id = patient_id.into();
        if patient_id.is_empty() {
            return Err(Error::Config("empty patient id".into()));
        }
        if modality.tag().is_empty() {
            return Err(Error::Config("empty modality tag".into()));
        }
        if shape.2 < 3 {
            return Err(Error::DataIntegrity(format!(
                "{patient_id}/{modality}: {} axial slice(s), at least 3 required",
                shape.2
            )));
        }
        Ok(VolumeRecord {
            patient_id,
            modality,
            path: path.into(),
            shape,
        })
    }

    /// Reads the header of `path` to fill in the voxel shape.
    pub fn probe(patient_id: &str, modality: Modality, path: &Path) -> Result<Self> {
        let header = nifti::NiftiHeader::from_file(path).map_err(|e| Error::Volume {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let shape = spatial_shape(&header.dim).map_err(|message| Error::Volume {
            path: path.to_path_buf(),
            message,
        })?;
        VolumeRecord::new(patient_id, modality, path, shape)
    }

    pub fn depth(&self) -> usize {
        self.shape.2
    }

    /// Loads the voxel data as `(nx, ny, nz)` floats.
    pub fn load(&self) -> Result<Array3<f32>> {
        read_volume(&self.path)
    }
}

fn spatial_shape(dim: &[u16; 8]) -> std::result::Result<(usize, usize, usize), String> {
    let rank = dim[0] as usize;
    if !(3..=7).contains(&rank) {
        return Err(format!("expected a 3D volume, header declares rank {rank}"));
    }
    if dim[4..=rank].iter().any(|&d| d > 1) {
        return Err(format!(
            "expected a 3D volume, got dimensions {:?}",
            &dim[1..=rank]
        ));
    }
    Ok((dim[1] as usize, dim[2] as usize, dim[3] as usize))
}

/// Reads a NIfTI volume (`.nii` or `.nii.gz`) as `(nx, ny, nz)` floats,
/// dropping trailing singleton dimensions.
pub fn read_volume(path: &Path) -> Result<Array3<f32>> {
    let err = |message: String| Error::Volume {
        path: path.to_path_buf(),
        message,
    };
    let obj = ReaderOptions::new()
        .read_file(path)
        .map_err(|e| err(e.to_string()))?;
    let data = obj
        .into_volume()
        .into_ndarray::<f32>()
        .map_err(|e| err(e.to_string()))?;
    let mut data = data;
    while data.ndim() > 3 && data.shape()[data.ndim() - 1] == 1 {
        let last = data.ndim() - 1;
        data = data.index_axis_move(ndarray::Axis(last), 0);
    }
    data.into_dimensionality::<Ix3>()
        .map_err(|_| err("expected a 3D volume".into()))
}

/// Writes `(nx, ny, nz)` floats as NIfTI; gzip is chosen by a `.gz` suffix.
pub fn write_volume(path: &Path, data: &Array3<f32>) -> Result<()> {
    nifti::writer::WriterOptions::new(path)
        .write_nifti(data)
        .map_err(|e| Error::Volume {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Filename patterns that select volumes of one modality.
///
/// The patient id of a match is the file name with the matched span removed
/// and trailing `-`, `_` or `.` separators trimmed, so
/// `BraTS-GLI-00002-000-t2w.nii.gz` yields patient `BraTS-GLI-00002-000`.
#[derive(Debug, Clone)]
pub struct ModalityPatterns {
    patterns: Vec<(Modality, Regex)>,
}

impl ModalityPatterns {
    pub fn new(pairs: &[(Modality, &str)]) -> Result<Self> {
        let patterns = pairs
            .iter()
            .map(|(m, p)| {
                Regex::new(p)
                    .map(|r| (m.clone(), r))
                    .map_err(|e| Error::Config(format!("pattern for {m}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModalityPatterns { patterns })
    }

    /// Default patterns covering BraTS (`t1n`, `t2w`, `t2f`) and IXI (`T1`, `T2`, `PD`) naming.
    pub fn defaults() -> Self {
        ModalityPatterns::new(&default_pattern_pairs()).expect("default patterns compile")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Modality, &Regex)> {
        self.patterns.iter().map(|(m, r)| (m, r))
    }

    /// Returns `(patient_id, modality)` for the first pattern matching `file_name`.
    pub fn classify(&self, file_name: &str) -> Option<(String, Modality)> {
        for (modality, re) in &self.patterns {
            if let Some(m) = re.find(file_name) {
                let mut id = String::with_capacity(file_name.len());
                id.push_str(&file_name[..m.start()]);
                id.push_str(&file_name[m.end()..]);
                let id = id.trim_end_matches(['-', '_', '.']).to_string();
                if !id.is_empty() {
                    return Some((id, modality.clone()));
                }
            }
        }
        None
    }
}

pub fn default_pattern_pairs() -> Vec<(Modality, &'static str)> {
    vec![
        (Modality::T1, r"(?i)[-_](t1|t1n)\.nii(\.gz)?$"),
        (Modality::T2, r"(?i)[-_](t2|t2w)\.nii(\.gz)?$"),
        (Modality::Flair, r"(?i)[-_](flair|t2f)\.nii(\.gz)?$"),
        (Modality::Pd, r"(?i)[-_]pd\.nii(\.gz)?$"),
    ]
}

/// A file that matched a modality pattern, before its header is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeCandidate {
    pub patient_id: String,
    pub modality: Modality,
    pub path: PathBuf,
}

/// Walks `root` (sorted, recursive) and classifies every file by `patterns`.
pub fn discover_volumes(root: &Path, patterns: &ModalityPatterns) -> Result<Vec<VolumeCandidate>> {
    if !root.is_dir() {
        return Err(Error::io_path(
            "volume root",
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut found = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            Error::io(
                format!("walking {}", root.display()),
                e.into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("filesystem loop")),
            )
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if let Some((patient_id, modality)) = patterns.classify(&name) {
            found.push(VolumeCandidate {
                patient_id,
                modality,
                path: entry.path().to_path_buf(),
            });
        }
    }
    Ok(found)
}
