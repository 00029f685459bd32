//! Error heatmaps and feature-map panels.
//!
//! Heatmaps use the "hot" ramp (black, red, yellow, white): luminance grows
//! with the error, so darker always means smaller.

use std::path::{Path, PathBuf};

use burn::prelude::*;
use ndarray::{s, Array2, Array3, ArrayView3, Axis};

use crate::data::images_to_tensor;
use crate::data::slab::save_rgb_png;
use crate::error::{Error, Result};
use crate::model::{FusionNodeId, Generator};

const GAP: usize = 4;
const BACKGROUND: u8 = 255;

/// Maps `t` in [0, 1] to the hot colormap.
pub fn hot(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let ch = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(3.0 * t), ch(3.0 * t - 1.0), ch(3.0 * t - 2.0)]
}

/// Per-pixel `|generated - target|`, averaged over channels, on the 8-bit scale.
pub fn abs_error(generated: ArrayView3<'_, u8>, target: ArrayView3<'_, u8>) -> Result<Array2<f64>> {
    if generated.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "heatmap inputs differ: {:?} vs {:?}",
            generated.dim(),
            target.dim()
        )));
    }
    let diff = Array3::from_shape_fn(generated.dim(), |i| (generated[i] as f64 - target[i] as f64).abs());
    Ok(diff.mean_axis(Axis(2)).expect("at least one channel"))
}

/// How errors are scaled before coloring.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HeatmapScale {
    /// Each image's own min..max spans the ramp; a flat map stays darkest.
    #[default]
    PerImage,
    /// `0..max` spans the ramp for every image, for side-by-side comparison.
    Shared { max: f64 },
}

pub fn colorize_error(err: &Array2<f64>, scale: HeatmapScale) -> Array3<u8> {
    let (lo, hi) = match scale {
        HeatmapScale::PerImage => {
            let lo = err.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = err.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        HeatmapScale::Shared { max } => (0.0, max),
    };
    let span = hi - lo;
    let (h, w) = err.dim();
    let mut out = Array3::zeros((h, w, 3));
    for ((y, x), &e) in err.indexed_iter() {
        let t = if span > 0.0 { (e - lo) / span } else { 0.0 };
        let c = hot(t);
        for k in 0..3 {
            out[[y, x, k]] = c[k];
        }
    }
    out
}

/// Places equally tall tiles left to right with a white gutter.
pub fn hstack(tiles: &[Array3<u8>]) -> Result<Array3<u8>> {
    let h = tiles.first().map(|t| t.dim().0).unwrap_or(0);
    if tiles.iter().any(|t| t.dim().0 != h || t.dim().2 != 3) {
        return Err(Error::Shape("panel tiles must share height and have 3 channels".into()));
    }
    let w: usize = tiles.iter().map(|t| t.dim().1).sum::<usize>() + GAP * tiles.len().saturating_sub(1);
    let mut out = Array3::from_elem((h, w, 3), BACKGROUND);
    let mut x0 = 0;
    for t in tiles {
        let tw = t.dim().1;
        out.slice_mut(s![.., x0..x0 + tw, ..]).assign(t);
        x0 += tw + GAP;
    }
    Ok(out)
}

/// Source, target, generated and heatmap side by side.
pub fn heatmap_panel(
    source: ArrayView3<'_, u8>,
    target: ArrayView3<'_, u8>,
    generated: ArrayView3<'_, u8>,
    scale: HeatmapScale,
) -> Result<Array3<u8>> {
    let heat = colorize_error(&abs_error(generated, target)?, scale);
    hstack(&[source.to_owned(), target.to_owned(), generated.to_owned(), heat])
}

pub fn render_error_heatmap(
    source: ArrayView3<'_, u8>,
    target: ArrayView3<'_, u8>,
    generated: ArrayView3<'_, u8>,
    scale: HeatmapScale,
    path: &Path,
) -> Result<()> {
    save_rgb_png(heatmap_panel(source, target, generated, scale)?.view(), path)
}

/// Min-max scales a map to gray levels; a constant map renders mid-gray.
pub fn gray_tile(map: &Array2<f64>) -> Array2<u8> {
    let lo = map.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Array2::from_elem(map.dim(), 128);
    }
    map.mapv(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
}

/// Nearest-neighbour enlargement to `size x size`.
fn enlarge(tile: &Array2<u8>, size: usize) -> Array2<u8> {
    let (h, w) = tile.dim();
    Array2::from_shape_fn((size, size), |(y, x)| tile[[y * h / size, x * w / size]])
}

// 3x5 glyphs, one row per u8 (low three bits, MSB = leftmost column).
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 3, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 2, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'x' => [0, 5, 2, 5, 0],
        ',' => [0, 0, 0, 2, 4],
        '_' => [0, 0, 0, 0, 7],
        '{' => [3, 2, 6, 2, 3],
        '}' => [6, 2, 3, 2, 6],
        _ => [0; 5],
    }
}

/// Draws `text` in black at `(y0, x0)`, each font pixel `px` wide.
pub fn draw_text(img: &mut Array3<u8>, text: &str, y0: usize, x0: usize, px: usize) {
    let (h, w, _) = img.dim();
    for (k, c) in text.chars().enumerate() {
        let g = glyph(c);
        for (r, bits) in g.iter().enumerate() {
            for col in 0..3 {
                if bits >> (2 - col) & 1 == 0 {
                    continue;
                }
                for dy in 0..px {
                    for dx in 0..px {
                        let y = y0 + r * px + dy;
                        let x = x0 + (k * 4 + col) * px + dx;
                        if y < h && x < w {
                            img.slice_mut(s![y, x, ..]).fill(0);
                        }
                    }
                }
            }
        }
    }
}

/// Label drawn under a panel tile, e.g. `x{1,0}`.
pub fn node_label(id: FusionNodeId) -> String {
    format!("x{{{},{}}}", id.i, id.j)
}

/// Tiles channel-mean maps left to right, each scaled on its own and
/// labelled underneath.
pub fn feature_panel(maps: &[(FusionNodeId, Array2<f64>)], tile: usize) -> Result<Array3<u8>> {
    let px = (tile / 64).max(1);
    let label_h = 7 * px;
    let tiles: Vec<Array3<u8>> = maps
        .iter()
        .map(|(id, m)| {
            let g = enlarge(&gray_tile(m), tile);
            let mut t = Array3::from_elem((tile + label_h, tile, 3), BACKGROUND);
            for k in 0..3 {
                t.slice_mut(s![..tile, .., k]).assign(&g);
            }
            draw_text(&mut t, &node_label(*id), tile + px, px, px);
            t
        })
        .collect();
    hstack(&tiles)
}

/// Channel-mean maps of `nodes` for one 8-bit sample.
pub fn feature_maps<B: Backend>(
    generator: &Generator<B>,
    sample: &Array3<u8>,
    nodes: &[FusionNodeId],
    device: &B::Device,
) -> Result<Vec<(FusionNodeId, Array2<f64>)>> {
    let x = images_to_tensor::<B>(std::slice::from_ref(sample), device);
    generator
        .dump_feature_maps(x, nodes)?
        .into_iter()
        .map(|(id, t)| {
            let [_, h, w] = t.dims();
            let v: Vec<f64> = t
                .into_data()
                .convert::<f64>()
                .to_vec()
                .map_err(|e| Error::Shape(format!("{e:?}")))?;
            let a = Array2::from_shape_vec((h, w), v).map_err(|e| Error::Shape(e.to_string()))?;
            Ok((id, a))
        })
        .collect()
}

pub fn render_feature_panels<B: Backend>(
    generator: &Generator<B>,
    sample: &Array3<u8>,
    nodes: &[FusionNodeId],
    path: &Path,
    device: &B::Device,
) -> Result<PathBuf> {
    let maps = feature_maps(generator, sample, nodes, device)?;
    let panel = feature_panel(&maps, 128)?;
    save_rgb_png(panel.view(), path)?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luminance(c: [u8; 3]) -> u32 {
        c.iter().map(|&v| v as u32).sum()
    }

    #[test]
    fn hot_is_monotone() {
        let mut prev = 0;
        for k in 0..=255 {
            let l = luminance(hot(k as f64 / 255.0));
            assert!(l >= prev);
            prev = l;
        }
        assert_eq!(hot(0.0), [0, 0, 0]);
        assert_eq!(hot(1.0), [255, 255, 255]);
    }

    #[test]
    fn zero_error_is_uniformly_darkest() {
        let a = Array3::from_shape_fn((8, 8, 3), |(y, x, c)| (y * 8 + x + c) as u8);
        let heat = colorize_error(&abs_error(a.view(), a.view()).unwrap(), HeatmapScale::PerImage);
        assert!(heat.iter().all(|&v| v == 0));
    }

    #[test]
    fn single_wrong_pixel_is_the_only_bright_one() {
        let a = Array3::from_elem((6, 6, 3), 40u8);
        let mut b = a.clone();
        b[[2, 3, 0]] = 200;
        let heat = colorize_error(&abs_error(b.view(), a.view()).unwrap(), HeatmapScale::PerImage);
        for y in 0..6 {
            for x in 0..6 {
                let px = [heat[[y, x, 0]], heat[[y, x, 1]], heat[[y, x, 2]]];
                if (y, x) == (2, 3) {
                    assert_eq!(px, [255, 255, 255]);
                } else {
                    assert_eq!(px, [0, 0, 0]);
                }
            }
        }
    }

    #[test]
    fn error_ramp_follows_colormap() {
        let t = Array3::<u8>::zeros((1, 16, 3));
        let g = Array3::from_shape_fn((1, 16, 3), |(_, x, _)| (x * 17) as u8);
        let heat = colorize_error(&abs_error(g.view(), t.view()).unwrap(), HeatmapScale::PerImage);
        for x in 0..16 {
            let want = hot(x as f64 * 17.0 / 255.0);
            assert_eq!([heat[[0, x, 0]], heat[[0, x, 1]], heat[[0, x, 2]]], want);
        }
        // Shared scale halves the reach when the max is doubled.
        let shared = colorize_error(&abs_error(g.view(), t.view()).unwrap(), HeatmapScale::Shared { max: 510.0 });
        assert_eq!([shared[[0, 15, 0]], shared[[0, 15, 1]], shared[[0, 15, 2]]], hot(0.5));
    }

    #[test]
    fn constant_map_is_mid_gray() {
        assert!(gray_tile(&Array2::from_elem((4, 4), 3.5)).iter().all(|&v| v == 128));
        let ramp = Array2::from_shape_fn((2, 2), |(y, x)| (y * 2 + x) as f64);
        let g = gray_tile(&ramp);
        assert_eq!((g[[0, 0]], g[[1, 1]]), (0, 255));
    }

    #[test]
    fn panel_layout() {
        let maps = vec![
            (FusionNodeId::new(1, 0), Array2::from_elem((4, 4), 1.0)),
            (FusionNodeId::new(2, 0), Array2::from_shape_fn((2, 2), |(y, _)| y as f64)),
        ];
        let p = feature_panel(&maps, 64).unwrap();
        assert_eq!(p.dim(), (64 + 7, 64 * 2 + GAP, 3));
        // Label ink below the first tile.
        assert!(p.slice(s![64.., ..64, ..]).iter().any(|&v| v == 0));
        assert_eq!(p[[10, 10, 0]], 128);
    }

    #[test]
    fn heatmap_shape_mismatch() {
        let a = Array3::<u8>::zeros((4, 4, 3));
        let b = Array3::<u8>::zeros((4, 5, 3));
        assert!(abs_error(a.view(), b.view()).is_err());
    }
}
