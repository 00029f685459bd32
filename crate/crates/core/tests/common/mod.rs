//! Naive reference implementations shared by the integration tests and the
//! acceptance target. Written straight from the definitions, with no reuse of
//! library code, so they can serve as independent oracles.

#![allow(dead_code)]

pub mod grad;

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A smooth random field plus noise, and a degraded copy of it. Pure noise
/// pairs would push most contrast-structure terms to zero, which says little
/// about agreement.
pub fn image_pair(seed: u64, size: usize) -> (Array3<u8>, Array3<u8>) {
    let mut r = rng(seed);
    let fx: f64 = r.random_range(0.02..0.15);
    let fy: f64 = r.random_range(0.02..0.15);
    let phase: f64 = r.random_range(0.0..6.3);
    let noise: f64 = r.random_range(2.0..40.0);
    let a = Array3::from_shape_fn((size, size, 3), |(y, x, c)| {
        let base = 128.0 + 90.0 * ((x as f64 * fx + phase + c as f64).sin() * (y as f64 * fy).cos());
        let n: f64 = r.random_range(-20.0..20.0);
        (base + n).round().clamp(0.0, 255.0) as u8
    });
    let b = a.mapv(|v| {
        let n: f64 = r.random_range(-noise..noise);
        (v as f64 * 0.9 + 10.0 + n).round().clamp(0.0, 255.0) as u8
    });
    (a, b)
}

pub fn oracle_mse(a: &Array3<u8>, b: &Array3<u8>) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = *x as f64 - *y as f64;
        s += d * d;
        n += 1;
    }
    s / n as f64
}

pub fn oracle_psnr(a: &Array3<u8>, b: &Array3<u8>) -> f64 {
    let m = oracle_mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        20.0 * 255f64.log10() - 10.0 * m.log10()
    }
}

pub fn oracle_nmse(gen: &Array3<u8>, reference: &Array3<u8>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, r) in gen.iter().zip(reference.iter()) {
        let (g, r) = (*g as f64, *r as f64);
        num += (g - r) * (g - r);
        den += r * r;
    }
    num / den
}

fn window(size: usize, sigma: f64) -> Array2<f64> {
    let c = (size / 2) as f64;
    let mut w = Array2::from_shape_fn((size, size), |(i, j)| {
        let (dy, dx) = (i as f64 - c, j as f64 - c);
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    });
    let total = w.sum();
    w /= total;
    w
}

/// Mean SSIM and mean contrast-structure over every valid window placement,
/// with the local moments summed directly from the 2D window.
pub fn oracle_ssim_plane(a: &Array2<f64>, b: &Array2<f64>, range: f64) -> (f64, f64) {
    let w = window(11, 1.5);
    let c1 = (0.01 * range) * (0.01 * range);
    let c2 = (0.03 * range) * (0.03 * range);
    let (h, wd) = a.dim();
    let (mut ssim, mut cs, mut n) = (0.0, 0.0, 0.0);
    for y in 0..=h - 11 {
        for x in 0..=wd - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    ma += w[[i, j]] * a[[y + i, x + j]];
                    mb += w[[i, j]] * b[[y + i, x + j]];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let da = a[[y + i, x + j]] - ma;
                    let db = b[[y + i, x + j]] - mb;
                    va += w[[i, j]] * da * da;
                    vb += w[[i, j]] * db * db;
                    cov += w[[i, j]] * da * db;
                }
            }
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let s = (2.0 * cov + c2) / (va + vb + c2);
            ssim += l * s;
            cs += s;
            n += 1.0;
        }
    }
    (ssim / n, cs / n)
}

fn plane(img: &Array3<u8>, c: usize) -> Array2<f64> {
    let (h, w, _) = img.dim();
    Array2::from_shape_fn((h, w), |(y, x)| img[[y, x, c]] as f64)
}

fn halve(p: &Array2<f64>) -> Array2<f64> {
    let (h, w) = p.dim();
    let mut out = Array2::zeros((h / 2, w / 2));
    for y in 0..h / 2 {
        for x in 0..w / 2 {
            let mut s = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    s += p[[2 * y + dy, 2 * x + dx]];
                }
            }
            out[[y, x]] = s / 4.0;
        }
    }
    out
}

pub fn oracle_ssim(a: &Array3<u8>, b: &Array3<u8>) -> f64 {
    let ch = a.dim().2;
    (0..ch)
        .map(|c| oracle_ssim_plane(&plane(a, c), &plane(b, c), 255.0).0)
        .sum::<f64>()
        / ch as f64
}

pub const MS_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

pub fn oracle_ms_ssim(a: &Array3<u8>, b: &Array3<u8>, scales: usize) -> f64 {
    let total: f64 = MS_WEIGHTS[..scales].iter().sum();
    let ch = a.dim().2;
    let mut acc = 0.0;
    for c in 0..ch {
        let (mut pa, mut pb) = (plane(a, c), plane(b, c));
        let mut score = 1.0;
        for (k, w) in MS_WEIGHTS[..scales].iter().enumerate() {
            let (s, cs) = oracle_ssim_plane(&pa, &pb, 255.0);
            let term = if k + 1 == scales { s } else { cs };
            score *= term.max(0.0).powf(w / total);
            pa = halve(&pa);
            pb = halve(&pb);
        }
        acc += score;
    }
    acc / ch as f64
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        return 0.0;
    }
    (got - want).abs() / want.abs().max(1e-12)
}

/// Slice `k` of the synthetic volume: `base_k + pattern`, where the pattern
/// spans `0..=m_k` with `m_k` a divisor of 255 so the 8-bit map is exact.
/// `flat` slices are uniform.
pub fn slice_value(x: usize, y: usize, z: usize, flat: &[usize]) -> f32 {
    const SPANS: [usize; 4] = [15, 17, 51, 85];
    let base = 10.0 * z as f32;
    if flat.contains(&z) {
        return base;
    }
    let m = SPANS[z % SPANS.len()];
    let v = (x * (z + 3) + y * (2 * z + 1) + z) % (m + 1);
    // Make sure both ends of the span are present.
    let v = if (x, y) == (0, 0) { 0 } else if (x, y) == (1, 0) { m } else { v };
    base + v as f32
}

pub fn synthetic_volume(n: usize, depth: usize, flat: &[usize]) -> ndarray::Array3<f32> {
    ndarray::Array3::from_shape_fn((n, n, depth), |(x, y, z)| slice_value(x, y, z, flat))
}

/// Reference slab: per-slice normalization and bilinear upsampling to 512,
/// in integer arithmetic. `n` must divide 512 so every sample weight is a
/// multiple of 1/(2 * 512/n), which makes the result exact.
pub fn reference_slab(vol: &ndarray::Array3<f32>, center: usize) -> Array3<u8> {
    let (n, _, _) = vol.dim();
    assert_eq!(512 % n, 0);
    let f = (512 / n) as i64;
    let mut out = Array3::zeros((512, 512, 3));
    for c in 0..3 {
        let z = center - 1 + c;
        // Rows follow y, columns follow x.
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for x in 0..n {
            for y in 0..n {
                lo = lo.min(vol[[x, y, z]]);
                hi = hi.max(vol[[x, y, z]]);
            }
        }
        let span = (hi - lo) as i64;
        let norm = |y: usize, x: usize| -> i64 {
            if span == 0 {
                0
            } else {
                let d = (vol[[x, y, z]] - lo) as i64;
                // round half up on non-negative values
                (2 * 255 * d + span) / (2 * span)
            }
        };
        // Source coordinate of output i, in units of 1/(2f): (2i + 1 - f) / (2f).
        let tap = |i: usize| -> (usize, usize, i64) {
            let num = (2 * i as i64 + 1 - f).clamp(0, 2 * f * (n as i64 - 1));
            let lo = (num / (2 * f)) as usize;
            (lo, (lo + 1).min(n - 1), num % (2 * f))
        };
        let den = 2 * f;
        for oy in 0..512 {
            let (y0, y1, wy) = tap(oy);
            for ox in 0..512 {
                let (x0, x1, wx) = tap(ox);
                let v = norm(y0, x0) * (den - wy) * (den - wx)
                    + norm(y0, x1) * (den - wy) * wx
                    + norm(y1, x0) * wy * (den - wx)
                    + norm(y1, x1) * wy * wx;
                let d2 = den * den;
                out[[oy, ox, c]] = ((2 * v + d2) / (2 * d2)) as u8;
            }
        }
    }
    out
}

/// `root/<patient>/<patient>_{t1,t2}.nii` for each patient id; patient `k`
/// reads slice pattern `z + 2k` (T1) and `z + 2k + 1` (T2). Returns the
/// volumes as `(t1, t2)` in id order.
pub fn write_patients(root: &Path, ids: &[&str], n: usize, depth: usize) -> Vec<(ndarray::Array3<f32>, ndarray::Array3<f32>)> {
    let mut out = Vec::new();
    for (k, id) in ids.iter().enumerate() {
        let dir = root.join(id);
        std::fs::create_dir_all(&dir).unwrap();
        let mut pair = Vec::new();
        for (m, shift) in [("t1", 0usize), ("t2", 1)] {
            let v = ndarray::Array3::from_shape_fn((n, n, depth), |(x, y, z)| {
                slice_value(x, y, z + 2 * k + shift, &[])
            });
            mritrans::data::volume::write_volume(&dir.join(format!("{id}_{m}.nii")), &v).unwrap();
            pair.push(v);
        }
        let t2 = pair.pop().unwrap();
        out.push((pair.pop().unwrap(), t2));
    }
    out
}

/// SE parameter overhead of a generator config, written out per encoder
/// stage: `C*h + h + h*C + C` with `h = ceil(C/r)`.
pub fn se_closed_form(cfg: &mritrans::model::GeneratorConfig) -> usize {
    (0..=cfg.depth)
        .map(|i| {
            let c = (cfg.base_channels << i).min(cfg.max_channels);
            let h = c.div_ceil(cfg.se_reduction).max(1);
            2 * c * h + h + c
        })
        .sum()
}

/// Four smooth 64 px sources and targets that are a fixed per-pixel contrast
/// map of them (channel rotation, then `1 - v^2`).
pub fn overfit_pairs() -> Vec<(Array3<u8>, Array3<u8>)> {
    (0..4u64)
        .map(|k| {
            let mut r = rng(k);
            let fx: f64 = r.random_range(0.03..0.12);
            let fy: f64 = r.random_range(0.03..0.12);
            let ph: f64 = r.random_range(0.0..6.0);
            let s = Array3::from_shape_fn((64, 64, 3), |(y, x, c)| {
                (128.0 + 100.0 * ((x as f64 * fx + ph + c as f64).sin() * (y as f64 * fy).cos())).round() as u8
            });
            let t = Array3::from_shape_fn((64, 64, 3), |(y, x, c)| {
                let v = s[[y, x, (c + 1) % 3]] as f64 / 255.0;
                (255.0 * (1.0 - v * v)).round() as u8
            });
            (s, t)
        })
        .collect()
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}
