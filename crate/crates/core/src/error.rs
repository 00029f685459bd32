use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("slice index {index} out of range: volume has {depth} axial slices, admissible centers are 1..={max}")]
    SliceIndex {
        index: usize,
        depth: usize,
        max: usize,
    },

    #[error("cannot read volume {path}: {message}")]
    Volume { path: PathBuf, message: String },

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("topology: {0}")]
    Topology(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "image of {size}px is too small for {requested} scales with a {window}-tap window; \
         at most {max_scales} scale(s) are feasible"
    )]
    TooSmall {
        size: usize,
        window: usize,
        requested: usize,
        max_scales: usize,
    },

    #[error("{0}")]
    Metric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(
        "training diverged at step {step}: non-finite {component} (last finite step: {})",
        last_finite_step.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
    )]
    Divergence {
        step: usize,
        last_finite_step: Option<usize>,
        component: String,
    },
}

/// Coarse error classes, used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Divergence,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn io_path(action: &str, path: &Path, source: std::io::Error) -> Self {
        Error::io(format!("{action} {}", path.display()), source)
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Topology(_) | Error::Shape(_) | Error::TooSmall { .. } => {
                ErrorClass::Usage
            }
            Error::Divergence { .. } => ErrorClass::Divergence,
            _ => ErrorClass::Data,
        }
    }
}
