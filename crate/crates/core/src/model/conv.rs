//! Convolutions as sums of matrix products.
//!
//! The ndarray backend differentiates its native convolutions with
//! element-by-element loops, which dominates training time on a CPU. Written
//! as slices, reshapes and 2D matmuls, both directions reuse the backend's
//! blocked matrix product. Parameters stay in burn's own modules, so
//! checkpoints are unaffected.

use burn::nn::conv::{Conv2d, ConvTranspose2d};
use burn::nn::PaddingConfig2d;
use burn::prelude::*;

fn padding_of(conv: &Conv2d<impl Backend>) -> [usize; 2] {
    match &conv.padding.0 {
        PaddingConfig2d::Explicit(h, w) => [*h, *w],
        PaddingConfig2d::Valid => [0, 0],
        PaddingConfig2d::Same => [(conv.kernel_size[0] - 1) / 2, (conv.kernel_size[1] - 1) / 2],
    }
}

/// `x` `(b, c, h, w)` zero-padded by `pad`, with `extra` more rows and
/// columns at the far edge.
fn pad<B: Backend>(x: Tensor<B, 4>, pad: [usize; 2], extra: [usize; 2]) -> Tensor<B, 4> {
    if pad == [0, 0] && extra == [0, 0] {
        return x;
    }
    x.pad((pad[1], pad[1] + extra[1], pad[0], pad[0] + extra[0]), 0.0)
}

/// Forward pass of `conv`; same result as `conv.forward(x)` up to rounding.
///
/// The padded input is split once into `stride x stride` phase grids laid out
/// as `(c, positions)` matrices. Each kernel tap is then one product of its
/// `(c_out, c)` weight slice with the matching phase, shifted into place and
/// summed. Only the input is copied, once, rather than once per tap.
pub fn conv2d<B: Backend>(conv: &Conv2d<B>, x: Tensor<B, 4>) -> Tensor<B, 4> {
    if conv.groups != 1 || conv.dilation != [1, 1] || conv.stride[0] != conv.stride[1] {
        return conv.forward(x);
    }
    let [b, c, h, w] = x.dims();
    let weight = conv.weight.val();
    let [co, _, kh, kw] = weight.dims();
    let [ph, pw] = padding_of(conv);
    let s = conv.stride[0];
    let oh = (h + 2 * ph - kh) / s + 1;
    let ow = (w + 2 * pw - kw) / s + 1;
    // phase grid extent
    let (gh, gw) = (oh + (kh - 1) / s, ow + (kw - 1) / s);
    let (th, tw) = (s * gh, s * gw);

    let xp = pad(x, [ph, pw], [th.saturating_sub(h + 2 * ph), tw.saturating_sub(w + 2 * pw)]);
    let xp = if xp.dims()[2] > th || xp.dims()[3] > tw {
        xp.slice([0..b, 0..c, 0..th, 0..tw])
    } else {
        xp
    };
    let n = b * gh * gw;
    let grid = xp.swap_dims(0, 1);
    let phases: Vec<Tensor<B, 2>> = if s == 1 {
        vec![grid.reshape([c, n])]
    } else {
        let g = grid.reshape([c * b, gh, s, gw, s]);
        (0..s * s)
            .map(|k| {
                let (a, d) = (k / s, k % s);
                g.clone()
                    .slice([0..c * b, 0..gh, a..a + 1, 0..gw, d..d + 1])
                    .reshape([c, n])
            })
            .collect()
    };

    let mut out: Option<Tensor<B, 4>> = None;
    for i in 0..kh {
        for j in 0..kw {
            let wt = weight.clone().slice([0..co, 0..c, i..i + 1, j..j + 1]).reshape([co, c]);
            let y = wt
                .matmul(phases[(i % s) * s + j % s].clone())
                .reshape([co, b, gh, gw])
                .slice([0..co, 0..b, i / s..i / s + oh, j / s..j / s + ow]);
            out = Some(match out {
                Some(acc) => acc + y,
                None => y,
            });
        }
    }
    let out = out.expect("kernel has at least one tap").swap_dims(0, 1);
    match &conv.bias {
        Some(bias) => out + bias.val().reshape([1, co, 1, 1]),
        None => out,
    }
}

/// Forward pass of `up`. Kernel equal to stride without padding is the only
/// layout the decoder builds; anything else defers to burn.
pub fn conv_transpose2d<B: Backend>(up: &ConvTranspose2d<B>, x: Tensor<B, 4>) -> Tensor<B, 4> {
    let [k, kw] = up.kernel_size;
    if up.groups != 1
        || up.dilation != [1, 1]
        || up.padding != [0, 0]
        || up.padding_out != [0, 0]
        || up.stride != [k, kw]
        || k != kw
    {
        return up.forward(x);
    }
    let [b, ci, h, w] = x.dims();
    let weight = up.weight.val();
    let co = weight.dims()[1];
    let rows = x.swap_dims(0, 1).reshape([ci, b * h * w]);
    // (co * k * k, ci) x (ci, b * h * w)
    let y = weight.reshape([ci, co * k * k]).swap_dims(0, 1).matmul(rows);
    // rows are (co, di, dj), columns (b, i, j); output pixel is (i * k + di, j * k + dj)
    let out: Tensor<B, 4> = y
        .reshape([co, k, k, b, h, w])
        .permute([3, 0, 4, 1, 5, 2])
        .reshape([b, co, h * k, w * k]);
    match &up.bias {
        Some(bias) => out + bias.val().reshape([1, co, 1, 1]),
        None => out,
    }
}
