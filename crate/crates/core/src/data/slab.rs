use std::path::Path;

use image::RgbImage;
use ndarray::{Array3, ArrayView3, Axis};

use super::normalize::normalize_slice;
use super::resize::{resize_hwc, resize_plane};
use super::volume::{Modality, VolumeRecord};
use crate::error::{Error, Result};

/// Edge length of stored slabs.
pub const SLAB_SIZE: usize = 512;

/// Where a slab came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlabSource {
    pub patient_id: String,
    pub modality: Modality,
    /// Central axial slice index.
    pub center: usize,
}

/// Three consecutive axial slices stacked as a pseudo-RGB image.
///
/// `pixels` is `(H, W, 3)`; channel `c` holds slice `center - 1 + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slab25D {
    pub pixels: Array3<u8>,
    pub source: SlabSource,
}

/// `floor(nz / 2)` clamped to the admissible centers `1..=nz-2`.
pub fn default_center(depth: usize) -> Result<usize> {
    if depth < 3 {
        return Err(Error::DataIntegrity(format!(
            "{depth} axial slice(s), at least 3 required"
        )));
    }
    Ok((depth / 2).clamp(1, depth - 2))
}

fn check_center(center: usize, depth: usize) -> Result<()> {
    if depth < 3 || center < 1 || center > depth - 2 {
        return Err(Error::SliceIndex {
            index: center,
            depth,
            max: depth.saturating_sub(2),
        });
    }
    Ok(())
}

/// One axial slice as a `(ny, nx)` plane: rows follow `y`, columns `x`.
fn axial_plane(volume: ArrayView3<'_, f32>, z: usize) -> ndarray::ArrayView2<'_, f32> {
    volume.index_axis_move(Axis(2), z).reversed_axes()
}

/// Builds the stacked `(SLAB_SIZE, SLAB_SIZE, 3)` pixels from in-memory voxels.
///
/// Each slice is normalized on its own, resized bilinearly, then stacked.
pub fn slab_pixels(volume: ArrayView3<'_, f32>, center: usize, label: &str) -> Result<Array3<u8>> {
    check_center(center, volume.len_of(Axis(2)))?;
    let mut out = Array3::zeros((SLAB_SIZE, SLAB_SIZE, 3));
    for c in 0..3 {
        let z = center - 1 + c;
        let plane = normalize_slice(axial_plane(volume, z), &format!("{label}/z={z}"))?;
        let plane = resize_plane(plane.view(), SLAB_SIZE, SLAB_SIZE);
        out.index_axis_mut(Axis(2), c).assign(&plane);
    }
    Ok(out)
}

/// Reads `volume` and builds the slab centred on `center`.
pub fn build_slab(volume: &VolumeRecord, center: usize) -> Result<Slab25D> {
    check_center(center, volume.depth())?;
    let data = volume.load()?;
    let label = format!("{}/{}", volume.patient_id, volume.modality);
    let pixels = slab_pixels(data.view(), center, &label)?;
    Ok(Slab25D {
        pixels,
        source: SlabSource {
            patient_id: volume.patient_id.clone(),
            modality: volume.modality.clone(),
            center,
        },
    })
}

/// Writes an `(H, W, 3)` array as an 8-bit RGB PNG.
pub fn save_rgb_png(pixels: ArrayView3<'_, u8>, path: &Path) -> Result<()> {
    let (h, w, c) = pixels.dim();
    if c != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {c}")));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io_path("creating", parent, e))?;
    }
    let raw: Vec<u8> = pixels.iter().copied().collect();
    let img = RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads an image as `(H, W, 3)` 8-bit RGB.
pub fn load_rgb_png(path: &Path) -> Result<Array3<u8>> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Array3::from_shape_vec((h as usize, w as usize, 3), img.into_raw())
        .expect("rgb buffer matches dimensions"))
}

/// Loads a stored slab and resamples it to `size x size`.
pub fn load_slab_resized(path: &Path, size: usize) -> Result<Array3<u8>> {
    let px = load_rgb_png(path)?;
    if px.dim().0 == size && px.dim().1 == size {
        return Ok(px);
    }
    Ok(resize_hwc(px.view(), size, size))
}
