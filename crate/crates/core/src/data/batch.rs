use burn::tensor::{backend::Backend, Tensor, TensorData};
use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Split};
use super::slab::load_slab_resized;
use crate::error::{Error, Result};

/// Training/evaluation resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Resolution {
    R128,
    R256,
}

impl Resolution {
    pub fn size(self) -> usize {
        match self {
            Resolution::R128 => 128,
            Resolution::R256 => 256,
        }
    }
}

impl TryFrom<usize> for Resolution {
    type Error = Error;

    fn try_from(v: usize) -> Result<Self> {
        match v {
            128 => Ok(Resolution::R128),
            256 => Ok(Resolution::R256),
            other => Err(Error::Config(format!(
                "unsupported resolution {other}; expected 128 or 256"
            ))),
        }
    }
}

impl From<Resolution> for usize {
    fn from(r: Resolution) -> usize {
        r.size()
    }
}

/// Maps 8-bit `(H, W, C)` pixels to channel-major model space `x / 127.5 - 1`.
pub fn to_model_space(px: ArrayView3<'_, u8>) -> Vec<f32> {
    let (h, w, c) = px.dim();
    let mut out = Vec::with_capacity(h * w * c);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out.push(px[[y, x, ch]] as f32 / 127.5 - 1.0);
            }
        }
    }
    out
}

/// Inverse of [`to_model_space`]: `round((x + 1) * 127.5)`, clamped to `[0, 255]`.
///
/// `chw` holds one `(C, H, W)` image.
pub fn from_model_space(chw: &[f32], channels: usize, h: usize, w: usize) -> Array3<u8> {
    assert_eq!(chw.len(), channels * h * w);
    Array3::from_shape_fn((h, w, channels), |(y, x, c)| {
        let v = chw[(c * h + y) * w + x] as f64;
        ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
    })
}

/// Converts a `(B, C, H, W)` model-space tensor to 8-bit `(H, W, C)` images.
pub fn tensor_to_images<B: Backend>(t: Tensor<B, 4>) -> Vec<Array3<u8>> {
    let [b, c, h, w] = t.dims();
    let data = t
        .into_data()
        .convert::<f32>()
        .into_vec::<f32>()
        .expect("float tensor");
    data.chunks(c * h * w)
        .take(b)
        .map(|chunk| from_model_space(chunk, c, h, w))
        .collect()
}

/// Stacks 8-bit `(H, W, C)` images into a `(B, C, H, W)` model-space tensor.
pub fn images_to_tensor<B: Backend>(images: &[Array3<u8>], device: &B::Device) -> Tensor<B, 4> {
    assert!(!images.is_empty(), "empty batch");
    let (h, w, c) = images[0].dim();
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        assert_eq!(img.dim(), (h, w, c), "ragged batch");
        data.extend(to_model_space(img.view()));
    }
    Tensor::from_data(TensorData::new(data, [images.len(), c, h, w]), device)
}

/// A batch of paired samples in model space.
#[derive(Debug, Clone)]
pub struct PairBatch<B: Backend> {
    pub ids: Vec<String>,
    pub source: Tensor<B, 4>,
    pub target: Tensor<B, 4>,
}

/// 8-bit source/target images for one sample at a given resolution.
pub fn load_pair_images(
    manifest: &DatasetManifest,
    split: Split,
    index: usize,
    resolution: Resolution,
) -> Result<(String, Array3<u8>, Array3<u8>)> {
    let list = manifest.entries(split);
    let entry = list.get(index).ok_or_else(|| {
        Error::DataIntegrity(format!(
            "index {index} outside the {} list of {} samples",
            split.as_str(),
            list.len()
        ))
    })?;
    let s = resolution.size();
    // Image errors carry the slab path, which names the sample.
    let src = load_slab_resized(&manifest.resolve(&entry.source), s)?;
    let tgt = load_slab_resized(&manifest.resolve(&entry.target), s)?;
    Ok((entry.id.clone(), src, tgt))
}

/// Loads the samples at `indices` of one split, resized to `resolution`.
pub fn load_batch<B: Backend>(
    manifest: &DatasetManifest,
    split: Split,
    indices: &[usize],
    resolution: Resolution,
    device: &B::Device,
) -> Result<PairBatch<B>> {
    if indices.is_empty() {
        return Err(Error::DataIntegrity("empty batch request".into()));
    }
    let mut ids = Vec::with_capacity(indices.len());
    let mut srcs = Vec::with_capacity(indices.len());
    let mut tgts = Vec::with_capacity(indices.len());
    for &i in indices {
        let (id, s, t) = load_pair_images(manifest, split, i, resolution)?;
        ids.push(id);
        srcs.push(s);
        tgts.push(t);
    }
    Ok(PairBatch {
        ids,
        source: images_to_tensor(&srcs, device),
        target: images_to_tensor(&tgts, device),
    })
}
