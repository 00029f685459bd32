use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use ndarray::ArrayView3;

use super::basic::{mse, nmse, psnr};
use super::lpips::LpipsBackend;
use super::ssim::{ms_ssim, ssim, SsimParams};
use crate::error::{Error, Result};

pub const PER_SAMPLE_CSV: &str = "report_per_sample.csv";
pub const AGGREGATE_CSV: &str = "report_aggregate.csv";

/// The six evaluation metrics, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    Ssim,
    Lpips,
    MsSsim,
    Mse,
    Nmse,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Psnr,
        Metric::Ssim,
        Metric::Lpips,
        Metric::MsSsim,
        Metric::Mse,
        Metric::Nmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Lpips => "lpips",
            Metric::MsSsim => "ms_ssim",
            Metric::Mse => "mse",
            Metric::Nmse => "nmse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Perceptual score of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum LpipsValue {
    Value(f64),
    /// No scorer configured.
    NotConfigured,
    /// The scorer failed for this sample.
    Failed(String),
}

impl LpipsValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpipsValue::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub sample_id: String,
    /// dB; `f64::INFINITY` for a perfect reconstruction.
    pub psnr: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
    pub mse: f64,
    pub nmse: f64,
    pub lpips: LpipsValue,
}

impl SampleMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Psnr => Some(self.psnr),
            Metric::Ssim => Some(self.ssim),
            Metric::Lpips => self.lpips.value(),
            Metric::MsSsim => Some(self.ms_ssim),
            Metric::Mse => Some(self.mse),
            Metric::Nmse => Some(self.nmse),
        }
    }
}

/// Scores a generated image against its reference.
pub fn score_pair(
    sample_id: &str,
    generated: ArrayView3<'_, u8>,
    reference: ArrayView3<'_, u8>,
    params: &SsimParams,
    ms_scales: usize,
    lpips: Option<&LpipsBackend>,
) -> Result<SampleMetrics> {
    let lpips = match lpips {
        None => LpipsValue::NotConfigured,
        Some(b) => match b.score(generated, reference) {
            Ok(v) => LpipsValue::Value(v),
            Err(reason) => {
                log::warn!("lpips failed for {sample_id}: {reason}");
                LpipsValue::Failed(reason)
            }
        },
    };
    Ok(SampleMetrics {
        sample_id: sample_id.to_string(),
        psnr: psnr(generated, reference)?,
        ssim: ssim(generated, reference, params)?,
        ms_ssim: ms_ssim(generated, reference, params, ms_scales)?,
        mse: mse(generated, reference)?,
        nmse: nmse(generated, reference)?,
        lpips,
    })
}

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: Metric,
    /// `None` when no sample produced a value (e.g. no perceptual scorer).
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Samples contributing to the mean.
    pub n: usize,
    /// Samples left out: infinite PSNR, or missing perceptual scores.
    pub excluded: usize,
}

/// Mean and population standard deviation of `values`, skipping non-finite
/// entries. Returns `(mean, std, used, excluded)`; `mean` is `+inf` and `std`
/// zero when every value is infinite.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64, usize, usize)> {
    if values.is_empty() {
        return Err(Error::Metric("cannot aggregate an empty list".into()));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = values.len() - finite.len();
    if finite.is_empty() {
        return Ok((f64::INFINITY, 0.0, 0, excluded));
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt(), finite.len(), excluded))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_sample: Vec<SampleMetrics>,
    pub aggregate: Vec<MetricSummary>,
    /// Free-form provenance lines (zero-shot flags, task mismatches).
    pub notes: Vec<String>,
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

impl MetricReport {
    pub fn from_samples(per_sample: Vec<SampleMetrics>) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::Metric("no samples to report".into()));
        }
        let mut summaries = Vec::with_capacity(Metric::ALL.len());
        for m in Metric::ALL {
            let values: Vec<f64> = per_sample.iter().filter_map(|s| s.get(m)).collect();
            let missing = per_sample.len() - values.len();
            let summary = if values.is_empty() {
                MetricSummary {
                    metric: m,
                    mean: None,
                    std: None,
                    n: 0,
                    excluded: missing,
                }
            } else {
                let (mean, std, n, excluded) = aggregate(&values)?;
                MetricSummary {
                    metric: m,
                    mean: Some(mean),
                    std: Some(std),
                    n,
                    excluded: excluded + missing,
                }
            };
            summaries.push(summary);
        }
        Ok(MetricReport {
            per_sample,
            aggregate: summaries,
            notes: Vec::new(),
        })
    }

    pub fn summary(&self, m: Metric) -> &MetricSummary {
        self.aggregate
            .iter()
            .find(|s| s.metric == m)
            .expect("every metric is aggregated")
    }

    pub fn per_sample_csv(&self) -> String {
        let mut s = String::from("sample_id,psnr,ssim,ms_ssim,mse,nmse,lpips\n");
        for r in &self.per_sample {
            let lp = match &r.lpips {
                LpipsValue::Value(v) => fmt_num(*v),
                LpipsValue::NotConfigured => "unavailable".into(),
                LpipsValue::Failed(_) => "failed".into(),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.sample_id,
                fmt_num(r.psnr),
                fmt_num(r.ssim),
                fmt_num(r.ms_ssim),
                fmt_num(r.mse),
                fmt_num(r.nmse),
                lp
            );
        }
        s
    }

    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("metric,mean,std,n,excluded\n");
        for a in &self.aggregate {
            let (mean, std) = match (a.mean, a.std) {
                (Some(m), Some(d)) => (fmt_num(m), fmt_num(d)),
                _ => ("unavailable".into(), "unavailable".into()),
            };
            let _ = writeln!(s, "{},{},{},{},{}", a.metric, mean, std, a.n, a.excluded);
        }
        s
    }

    /// Writes the two CSVs (and `report_notes.txt` when notes exist) into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;
        let per = dir.join(PER_SAMPLE_CSV);
        let agg = dir.join(AGGREGATE_CSV);
        std::fs::write(&per, self.per_sample_csv()).map_err(|e| Error::io_path("writing", &per, e))?;
        std::fs::write(&agg, self.aggregate_csv()).map_err(|e| Error::io_path("writing", &agg, e))?;
        let mut failures = String::new();
        for r in &self.per_sample {
            if let LpipsValue::Failed(reason) = &r.lpips {
                let _ = writeln!(failures, "lpips failed for {}: {reason}", r.sample_id);
            }
        }
        if !self.notes.is_empty() || !failures.is_empty() {
            let notes = dir.join("report_notes.txt");
            let mut text = self.notes.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&failures);
            std::fs::write(&notes, text).map_err(|e| Error::io_path("writing", &notes, e))?;
        }
        Ok((per, agg))
    }
}
