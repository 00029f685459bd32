//! Structural similarity, single- and multi-scale.
//!
//! Local statistics use a normalized Gaussian window evaluated only at
//! *valid* positions (no padding), so an `H x W` plane yields an
//! `(H - k + 1) x (W - k + 1)` map for a `k`-tap window. Multi-channel
//! images are scored per channel and averaged.
//!
//! Multi-scale scores combine per-scale mean contrast-structure terms with
//! the full SSIM (luminance included) at the coarsest scale:
//!
//! ```text
//! ms_ssim = prod_{j < M} relu(cs_j)^w_j * relu(ssim_M)^w_M
//! ```
//!
//! where the weights are the first `M` entries of [`SsimParams::ms_weights`]
//! rescaled to sum to one, and images are reduced between scales by 2x2
//! average pooling (a trailing odd row or column is dropped).

use ndarray::{Array2, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard five-scale exponents.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Gaussian window edge length (odd).
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
    pub ms_weights: Vec<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 255.0,
            ms_weights: MS_SSIM_WEIGHTS.to_vec(),
        }
    }
}

impl SsimParams {
    /// Same window and constants with a data range of 1.
    pub fn unit_range() -> Self {
        SsimParams {
            data_range: 1.0,
            ..SsimParams::default()
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }

    /// The first `scales` exponents, rescaled to sum to one.
    pub fn scale_weights(&self, scales: usize) -> Result<Vec<f64>> {
        if scales == 0 || scales > self.ms_weights.len() {
            return Err(Error::Config(format!(
                "{scales} scales requested, {} weights configured",
                self.ms_weights.len()
            )));
        }
        let w = &self.ms_weights[..scales];
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|v| v / total).collect())
    }

    /// Largest scale count whose coarsest level still fits the window.
    pub fn max_scales(&self, size: usize) -> usize {
        let mut n = 0;
        let mut s = size;
        while s >= self.window && n < self.ms_weights.len() {
            n += 1;
            s /= 2;
        }
        n
    }

    /// Errors unless `size` admits `scales` levels.
    pub fn check_scales(&self, size: usize, scales: usize) -> Result<()> {
        let max = self.max_scales(size);
        if scales == 0 || scales > max {
            return Err(Error::TooSmall {
                size,
                window: self.window,
                requested: scales,
                max_scales: max,
            });
        }
        Ok(())
    }
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Valid-mode separable filtering.
fn filter_valid(plane: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let k = taps.len();
    let (h, w) = plane.dim();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = Array2::zeros((h, ow));
    for y in 0..h {
        let src = plane.row(y);
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &wt) in taps.iter().enumerate() {
                acc += wt * src[x + t];
            }
            rows[[y, x]] = acc;
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for y in 0..oh {
        for (t, &wt) in taps.iter().enumerate() {
            let src = rows.row(y + t);
            let mut dst = out.row_mut(y);
            dst.scaled_add(wt, &src);
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of one plane pair.
pub(crate) fn plane_stats(a: &Array2<f64>, b: &Array2<f64>, p: &SsimParams) -> (f64, f64) {
    let taps = gaussian_taps(p.window, p.sigma);
    let mu_a = filter_valid(a, &taps);
    let mu_b = filter_valid(b, &taps);
    let e_aa = filter_valid(&(a * a), &taps);
    let e_bb = filter_valid(&(b * b), &taps);
    let e_ab = filter_valid(&(a * b), &taps);
    let (c1, c2) = (p.c1(), p.c2());

    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for ((((&ma, &mb), &aa), &bb), &ab) in mu_a
        .iter()
        .zip(mu_b.iter())
        .zip(e_aa.iter())
        .zip(e_bb.iter())
        .zip(e_ab.iter())
    {
        let var_a = aa - ma * ma;
        let var_b = bb - mb * mb;
        let cov = ab - ma * mb;
        let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        let lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim_sum += lum * cs;
        cs_sum += cs;
    }
    let n = mu_a.len() as f64;
    (ssim_sum / n, cs_sum / n)
}

fn planes(img: &ArrayView3<'_, u8>) -> Vec<Array2<f64>> {
    img.axis_iter(Axis(2))
        .map(|p| p.mapv(|v| v as f64))
        .collect()
}

fn check_pair(a: &ArrayView3<'_, u8>, b: &ArrayView3<'_, u8>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// 2x2 average pooling with stride 2.
pub fn downsample2(p: ArrayView2<'_, f64>) -> Array2<f64> {
    let (h, w) = p.dim();
    Array2::from_shape_fn((h / 2, w / 2), |(y, x)| {
        (p[[2 * y, 2 * x]] + p[[2 * y, 2 * x + 1]] + p[[2 * y + 1, 2 * x]] + p[[2 * y + 1, 2 * x + 1]])
            / 4.0
    })
}

/// Mean SSIM over valid window positions, averaged over channels.
pub fn ssim(a: ArrayView3<'_, u8>, b: ArrayView3<'_, u8>, params: &SsimParams) -> Result<f64> {
    check_pair(&a, &b)?;
    let (h, w, _) = a.dim();
    if h.min(w) < params.window {
        return Err(Error::TooSmall {
            size: h.min(w),
            window: params.window,
            requested: 1,
            max_scales: 0,
        });
    }
    let (pa, pb) = (planes(&a), planes(&b));
    let total: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| plane_stats(x, y, params).0)
        .sum();
    Ok(total / pa.len() as f64)
}

/// Multi-scale SSIM of one plane pair.
pub(crate) fn ms_ssim_plane(a: &Array2<f64>, b: &Array2<f64>, params: &SsimParams, weights: &[f64]) -> f64 {
    let scales = weights.len();
    let mut a = a.clone();
    let mut b = b.clone();
    let mut score = 1.0;
    for (j, &wt) in weights.iter().enumerate() {
        let (s, cs) = plane_stats(&a, &b, params);
        if j + 1 == scales {
            score *= s.max(0.0).powf(wt);
        } else {
            score *= cs.max(0.0).powf(wt);
            a = downsample2(a.view());
            b = downsample2(b.view());
        }
    }
    score
}

/// Multi-scale SSIM with `scales` levels, averaged over channels.
pub fn ms_ssim(
    a: ArrayView3<'_, u8>,
    b: ArrayView3<'_, u8>,
    params: &SsimParams,
    scales: usize,
) -> Result<f64> {
    check_pair(&a, &b)?;
    let (h, w, _) = a.dim();
    params.check_scales(h.min(w), scales)?;
    let weights = params.scale_weights(scales)?;
    let (pa, pb) = (planes(&a), planes(&b));
    let total: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| ms_ssim_plane(x, y, params, &weights))
        .sum();
    Ok(total / pa.len() as f64)
}

/// Scale count used when evaluating at `size`: five when they fit, otherwise
/// the largest feasible count (four at 128 px).
pub fn eval_scales(params: &SsimParams, size: usize) -> usize {
    params.max_scales(size).min(params.ms_weights.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};

    fn noise(seed: u64, h: usize, w: usize) -> Array3<u8> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((h, w, 3), |_| rng.random())
    }

    #[test]
    fn window_and_weights_normalized() {
        let t = gaussian_taps(11, 1.5);
        let total: f64 = t.iter().flat_map(|a| t.iter().map(move |b| a * b)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p = SsimParams::default();
        for m in 1..=5 {
            let w = p.scale_weights(m).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility() {
        let p = SsimParams::default();
        assert_eq!(p.max_scales(176), 5);
        assert_eq!(p.max_scales(175), 4);
        assert_eq!(p.max_scales(128), 4);
        assert_eq!(p.max_scales(256), 5);
        assert_eq!(p.max_scales(32), 2);
        assert_eq!(p.max_scales(10), 0);
        let a = noise(1, 128, 128);
        let err = ms_ssim(a.view(), a.view(), &p, 5).unwrap_err();
        assert!(err.to_string().contains("at most 4"), "{err}");
    }

    #[test]
    fn identical_is_one() {
        let p = SsimParams::default();
        let a = noise(2, 40, 48);
        assert!((ssim(a.view(), a.view(), &p).unwrap() - 1.0).abs() < 1e-9);
        let a = noise(3, 176, 176);
        assert!((ms_ssim(a.view(), a.view(), &p, 5).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_scale_equals_ssim() {
        let p = SsimParams::default();
        let a = noise(4, 32, 32);
        let b = a.mapv(|v| v.saturating_add(17));
        let s = ssim(a.view(), b.view(), &p).unwrap();
        let m = ms_ssim(a.view(), b.view(), &p, 1).unwrap();
        assert!((s - m).abs() < 1e-15);
    }

    #[test]
    fn symmetric() {
        let p = SsimParams::default();
        let a = noise(5, 64, 64);
        let b = noise(6, 64, 64);
        assert_eq!(
            ssim(a.view(), b.view(), &p).unwrap(),
            ssim(b.view(), a.view(), &p).unwrap()
        );
    }

    #[test]
    fn too_small_for_window() {
        let p = SsimParams::default();
        let a = noise(7, 10, 40);
        assert!(ssim(a.view(), a.view(), &p).is_err());
    }
}
