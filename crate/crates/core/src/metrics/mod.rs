//! Image-quality metrics on 8-bit `(H, W, C)` images.

pub mod basic;
pub mod lpips;
pub mod report;
pub mod ssim;

pub use basic::{mse, nmse, psnr, PEAK};
pub use lpips::LpipsBackend;
pub use report::{
    aggregate, score_pair, LpipsValue, Metric, MetricReport, MetricSummary, SampleMetrics,
    AGGREGATE_CSV, PER_SAMPLE_CSV,
};
pub use ssim::{eval_scales, gaussian_taps, ms_ssim, ssim, SsimParams, MS_SSIM_WEIGHTS};
