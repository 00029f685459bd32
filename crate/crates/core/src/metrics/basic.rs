use ndarray::ArrayView3;

use crate::error::{Error, Result};

/// Peak value of the 8-bit evaluation domain.
pub const PEAK: f64 = 255.0;

fn check_same(a: &ArrayView3<'_, u8>, b: &ArrayView3<'_, u8>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "image shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(())
}

fn sum_sq_diff(a: &ArrayView3<'_, u8>, b: &ArrayView3<'_, u8>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Mean squared error over all pixels and channels on the `[0, 255]` scale.
pub fn mse(a: ArrayView3<'_, u8>, b: ArrayView3<'_, u8>) -> Result<f64> {
    check_same(&a, &b)?;
    Ok(sum_sq_diff(&a, &b) / a.len() as f64)
}

/// `10 log10(255^2 / mse)`; `f64::INFINITY` when the images are identical.
pub fn psnr(a: ArrayView3<'_, u8>, b: ArrayView3<'_, u8>) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / m).log10())
}

/// `||generated - reference||^2 / ||reference||^2`.
///
/// Deliberately asymmetric: the reference supplies the denominator.
pub fn nmse(generated: ArrayView3<'_, u8>, reference: ArrayView3<'_, u8>) -> Result<f64> {
    check_same(&generated, &reference)?;
    let energy: f64 = reference.iter().map(|&v| (v as f64) * (v as f64)).sum();
    if energy == 0.0 {
        return Err(Error::Metric(
            "nmse undefined: reference image has zero energy".into(),
        ));
    }
    Ok(sum_sq_diff(&generated, &reference) / energy)
}
