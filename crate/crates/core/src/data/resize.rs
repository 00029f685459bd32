//! Bilinear resampling with half-pixel-centred sample coordinates.
//!
//! Output pixel `(y, x)` samples the source at
//! `((y + 0.5) * in_h / out_h - 0.5, (x + 0.5) * in_w / out_w - 0.5)`,
//! clamped to the source extent. No antialiasing filter is applied, so an
//! exact 2x reduction averages each 2x2 block.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

struct Taps {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(out_len: usize, in_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor() as usize;
            Taps {
                lo,
                hi: (lo + 1).min(in_len - 1),
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Resamples one 8-bit plane, rounding to the nearest integer level.
pub fn resize_plane(src: ArrayView2<'_, u8>, out_h: usize, out_w: usize) -> Array2<u8> {
    let (in_h, in_w) = src.dim();
    assert!(in_h > 0 && in_w > 0, "cannot resize an empty plane");
    if (in_h, in_w) == (out_h, out_w) {
        return src.to_owned();
    }
    let ty = taps(out_h, in_h);
    let tx = taps(out_w, in_w);
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let (ry, rx) = (&ty[y], &tx[x]);
        let p = |yy: usize, xx: usize| src[[yy, xx]] as f64;
        let top = p(ry.lo, rx.lo) * (1.0 - rx.frac) + p(ry.lo, rx.hi) * rx.frac;
        let bottom = p(ry.hi, rx.lo) * (1.0 - rx.frac) + p(ry.hi, rx.hi) * rx.frac;
        let v = top * (1.0 - ry.frac) + bottom * ry.frac;
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// Resamples an `(H, W, C)` image channel by channel.
pub fn resize_hwc(src: ArrayView3<'_, u8>, out_h: usize, out_w: usize) -> Array3<u8> {
    let channels = src.len_of(Axis(2));
    let mut out = Array3::zeros((out_h, out_w, channels));
    for c in 0..channels {
        let plane = resize_plane(src.index_axis(Axis(2), c), out_h, out_w);
        out.index_axis_mut(Axis(2), c).assign(&plane);
    }
    out
}
