//! Generator and discriminator losses on model-space tensors in `[-1, 1]`.

use burn::prelude::*;
use burn::tensor::module::{avg_pool2d, conv2d};
use burn::tensor::ops::ConvOptions;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ssim::{gaussian_taps, SsimParams};
use crate::model::Discriminator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// L1 weight.
    pub lambda1: f64,
    /// MS-SSIM weight.
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 100.0,
            lambda2: 100.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative, got lambda1={} lambda2={}",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanMode {
    /// Binary cross-entropy on logits.
    #[default]
    Bce,
    /// Least squares on raw outputs.
    Lsgan,
}

impl std::str::FromStr for GanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(GanMode::Bce),
            "lsgan" => Ok(GanMode::Lsgan),
            _ => Err(Error::Config(format!("unknown gan mode {s:?}; expected bce or lsgan"))),
        }
    }
}

impl std::fmt::Display for GanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GanMode::Bce => "bce",
            GanMode::Lsgan => "lsgan",
        })
    }
}

/// Scalar values of one generator loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub adv: f64,
    pub l1: f64,
    pub ms_ssim_loss: f64,
    pub total: f64,
}

fn same_shape<const D: usize>(a: [usize; D], b: [usize; D]) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn l1_loss<B: Backend>(generated: Tensor<B, 4>, target: Tensor<B, 4>) -> Result<Tensor<B, 1>> {
    same_shape(generated.dims(), target.dims())?;
    Ok((generated - target).abs().mean())
}

/// Depthwise valid-mode Gaussian filter, applied as two 1D passes.
fn blur<B: Backend>(x: Tensor<B, 4>, taps: &[f64]) -> Tensor<B, 4> {
    let [_, c, _, _] = x.dims();
    let k = taps.len();
    let device = x.device();
    let row: Vec<f64> = (0..c).flat_map(|_| taps.iter().copied()).collect();
    let w_h = Tensor::<B, 4>::from_data(TensorData::new(row.clone(), [c, 1, 1, k]), &device);
    let w_v = Tensor::<B, 4>::from_data(TensorData::new(row, [c, 1, k, 1]), &device);
    let opts = ConvOptions::new([1, 1], [0, 0], [1, 1], c);
    let x = conv2d(x, w_h, None, opts.clone());
    conv2d(x, w_v, None, opts)
}

/// Per-plane `(mean ssim, mean cs)`, each shaped `(batch, channels)`.
fn plane_stats<B: Backend>(a: Tensor<B, 4>, b: Tensor<B, 4>, p: &SsimParams) -> (Tensor<B, 2>, Tensor<B, 2>) {
    let taps = gaussian_taps(p.window, p.sigma);
    let [n, c, _, _] = a.dims();
    let mu_a = blur(a.clone(), &taps);
    let mu_b = blur(b.clone(), &taps);
    let e_aa = blur(a.clone() * a.clone(), &taps);
    let e_bb = blur(b.clone() * b.clone(), &taps);
    let e_ab = blur(a * b, &taps);
    let var_a = e_aa - mu_a.clone() * mu_a.clone();
    let var_b = e_bb - mu_b.clone() * mu_b.clone();
    let cov = e_ab - mu_a.clone() * mu_b.clone();
    let (c1, c2) = (p.c1(), p.c2());
    let cs = (cov * 2.0 + c2) / (var_a + var_b + c2);
    let lum = (mu_a.clone() * mu_b.clone() * 2.0 + c1) / (mu_a.clone() * mu_a + mu_b.clone() * mu_b + c1);
    let ssim = (lum * cs.clone()).mean_dim(3).mean_dim(2).reshape([n, c]);
    let cs = cs.mean_dim(3).mean_dim(2).reshape([n, c]);
    (ssim, cs)
}

/// `relu(x)^w` with a zero gradient wherever `x <= 0`.
fn relu_pow<B: Backend>(x: Tensor<B, 2>, w: f64) -> Tensor<B, 2> {
    let dead = x.clone().lower_equal_elem(0.0);
    x.clamp_min(1e-30).powf_scalar(w).mask_fill(dead, 0.0)
}

/// Differentiable multi-scale SSIM per `(batch, channel)` plane, on tensors
/// already in the metric's data range.
pub fn ms_ssim_tensor<B: Backend>(
    a: Tensor<B, 4>,
    b: Tensor<B, 4>,
    params: &SsimParams,
    scales: usize,
) -> Result<Tensor<B, 2>> {
    same_shape(a.dims(), b.dims())?;
    let [_, _, h, w] = a.dims();
    params.check_scales(h.min(w), scales)?;
    let weights = params.scale_weights(scales)?;
    let (mut a, mut b) = (a, b);
    let mut score: Option<Tensor<B, 2>> = None;
    for (j, &wt) in weights.iter().enumerate() {
        let (ssim, cs) = plane_stats(a.clone(), b.clone(), params);
        let term = if j + 1 == scales { relu_pow(ssim, wt) } else { relu_pow(cs, wt) };
        score = Some(match score {
            Some(s) => s * term,
            None => term,
        });
        if j + 1 < scales {
            a = avg_pool2d(a, [2, 2], [2, 2], [0, 0], true);
            b = avg_pool2d(b, [2, 2], [2, 2], [0, 0], true);
        }
    }
    Ok(score.expect("at least one scale"))
}

/// Scale count for a loss at `size`: as many as fit, at most five.
pub fn loss_scales(params: &SsimParams, size: usize) -> usize {
    crate::metrics::eval_scales(params, size)
}

/// `1 - MS-SSIM`, with `[-1, 1]` inputs mapped to `[0, 1]` and a data range of 1.
/// `scales = None` picks the largest feasible count.
pub fn ms_ssim_loss<B: Backend>(
    generated: Tensor<B, 4>,
    target: Tensor<B, 4>,
    params: &SsimParams,
    scales: Option<usize>,
) -> Result<Tensor<B, 1>> {
    let [_, _, h, w] = generated.dims();
    let scales = match scales {
        Some(s) => s,
        None => {
            let s = loss_scales(params, h.min(w));
            params.check_scales(h.min(w), s.max(1))?;
            s
        }
    };
    let a = (generated + 1.0) / 2.0;
    let b = (target + 1.0) / 2.0;
    let score = ms_ssim_tensor(a, b, params, scales)?;
    Ok(score.mean().neg() + 1.0)
}

/// `log(1 + e^x)` without overflow. Each branch only sees the half-line it
/// is selected on, so gradients stay finite and exact at 0.
pub fn softplus<B: Backend, const D: usize>(x: Tensor<B, D>) -> Tensor<B, D> {
    let neg = x.clone().lower_elem(0.0);
    let xp = x.clone().mask_fill(neg.clone(), 0.0);
    let xn = x.mask_fill(neg.clone().bool_not(), 0.0);
    let upper = xp.clone() + xp.neg().exp().log1p();
    let lower = xn.exp().log1p();
    upper.mask_where(neg, lower)
}

/// Numerically stable `BCE(sigmoid(x), y)`, averaged: `softplus(x) - x y`.
pub fn bce_with_logits<B: Backend, const D: usize>(logits: Tensor<B, D>, label: f64) -> Tensor<B, 1> {
    (softplus(logits.clone()) - logits * label).mean()
}

fn lsgan<B: Backend>(out: Tensor<B, 4>, label: f64) -> Tensor<B, 1> {
    (out - label).powf_scalar(2.0).mean()
}

/// Loss pushing the discriminator's verdict on `logits` toward `label`.
pub fn gan_loss<B: Backend>(logits: Tensor<B, 4>, label: f64, mode: GanMode) -> Tensor<B, 1> {
    match mode {
        GanMode::Bce => bce_with_logits(logits, label),
        GanMode::Lsgan => lsgan(logits, label),
    }
}

/// `0.5 * [L(real, 1) + L(fake, 0)]`.
pub fn discriminator_loss<B: Backend>(real: Tensor<B, 4>, fake: Tensor<B, 4>, mode: GanMode) -> Tensor<B, 1> {
    (gan_loss(real, 1.0, mode) + gan_loss(fake, 0.0, mode)) * 0.5
}

/// `(g_adv, d_loss)` for one batch. The discriminator term sees the
/// generated images detached.
pub fn adversarial_losses<B: Backend>(
    disc: &Discriminator<B>,
    source: Tensor<B, 4>,
    target: Tensor<B, 4>,
    generated: Tensor<B, 4>,
    mode: GanMode,
) -> Result<(Tensor<B, 1>, Tensor<B, 1>)> {
    same_shape(source.dims(), target.dims())?;
    same_shape(source.dims(), generated.dims())?;
    let real = disc.try_forward(source.clone(), target)?;
    let fake_d = disc.try_forward(source.clone(), generated.clone().detach())?;
    let fake_g = disc.try_forward(source, generated)?;
    Ok((gan_loss(fake_g, 1.0, mode), discriminator_loss(real, fake_d, mode)))
}

fn scalar<B: Backend>(t: &Tensor<B, 1>) -> f64 {
    t.clone().into_scalar().elem::<f64>()
}

/// `adv + lambda1 * l1 + lambda2 * ms`, kept in the graph, plus its values.
pub fn total_generator_loss<B: Backend>(
    adv: Tensor<B, 1>,
    l1: Tensor<B, 1>,
    ms: Tensor<B, 1>,
    weights: &LossWeights,
) -> Result<(Tensor<B, 1>, LossBreakdown)> {
    let parts = [("adv", scalar(&adv)), ("l1", scalar(&l1)), ("ms_ssim_loss", scalar(&ms))];
    if let Some((name, _)) = parts.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            last_finite_step: None,
            component: (*name).to_string(),
        });
    }
    let total = adv + l1 * weights.lambda1 + ms * weights.lambda2;
    let breakdown = LossBreakdown {
        adv: parts[0].1,
        l1: parts[1].1,
        ms_ssim_loss: parts[2].1,
        total: scalar(&total),
    };
    Ok((total, breakdown))
}
