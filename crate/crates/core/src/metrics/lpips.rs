//! Delegates perceptual similarity to an external scorer.
//!
//! The scorer is any executable that accepts two image paths as its final
//! arguments and prints a single decimal number on stdout.

use std::path::Path;
use std::process::Command;

use ndarray::ArrayView3;
use serde::{Deserialize, Serialize};

use crate::data::slab::save_rgb_png;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpipsBackend {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl LpipsBackend {
    pub fn new(program: impl Into<String>) -> Self {
        LpipsBackend {
            program: program.into(),
            args: Vec::new(),
        }
    }

    /// Parses a whitespace-separated command line such as `python lpips.py --net alex`.
    pub fn from_command_line(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(LpipsBackend {
            program,
            args: parts.collect(),
        })
    }

    /// Scores two image files. The error string is a per-sample reason.
    pub fn score_files(&self, a: &Path, b: &Path) -> Result<f64, String> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(a)
            .arg(b)
            .output()
            .map_err(|e| format!("failed to launch {}: {e}", self.program))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                stderr.trim()
            ));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let text = stdout.trim();
        let value: f64 = text
            .parse()
            .map_err(|_| format!("non-numeric scorer output {text:?}"))?;
        if !value.is_finite() {
            return Err(format!("non-finite scorer output {text:?}"));
        }
        Ok(value)
    }

    /// Scores two in-memory `(H, W, 3)` images via temporary PNG files.
    pub fn score(&self, a: ArrayView3<'_, u8>, b: ArrayView3<'_, u8>) -> Result<f64, String> {
        let dir = tempfile::tempdir().map_err(|e| format!("temporary directory: {e}"))?;
        let (pa, pb) = (dir.path().join("a.png"), dir.path().join("b.png"));
        save_rgb_png(a, &pa).map_err(|e| e.to_string())?;
        save_rgb_png(b, &pb).map_err(|e| e.to_string())?;
        self.score_files(&pa, &pb)
    }
}
