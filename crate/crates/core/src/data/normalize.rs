use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Linearly maps one slice onto the full 8-bit range.
///
/// `round(255 * (x - min) / (max - min))`, rounding halves away from zero.
/// A slice with no intensity range (every voxel equal) maps to all zeros.
/// `name` identifies the slice in the error raised for non-finite input.
pub fn normalize_slice<T>(raw: ArrayView2<'_, T>, name: &str) -> Result<Array2<u8>>
where
    T: Copy + Into<f64>,
{
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in raw.iter() {
        let v: f64 = v.into();
        if !v.is_finite() {
            return Err(Error::DataIntegrity(format!(
                "slice {name} contains a non-finite value ({v})"
            )));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }

    if raw.is_empty() || hi <= lo {
        return Ok(Array2::zeros(raw.raw_dim()));
    }

    let scale = 255.0 / (hi - lo);
    Ok(raw.mapv(|v| {
        let v: f64 = v.into();
        ((v - lo) * scale).round().clamp(0.0, 255.0) as u8
    }))
}
