//! Squeeze-and-excitation channel gating.

use burn::nn::{Linear, LinearConfig};
use burn::prelude::*;
use burn::tensor::activation::relu;

use crate::objectives::softplus;

use super::init::XavierInit;
use crate::error::{Error, Result};

/// Bottleneck width for `channels` at reduction `r`, rounded up and at least one.
pub fn se_hidden(channels: usize, reduction: usize) -> usize {
    channels.div_ceil(reduction.max(1)).max(1)
}

/// Parameters an SE block adds on top of a plain block with `channels` outputs.
pub fn se_param_count(channels: usize, reduction: usize) -> usize {
    let h = se_hidden(channels, reduction);
    channels * h + h + h * channels + channels
}

#[derive(Module, Debug)]
pub struct SeBlock<B: Backend> {
    pub squeeze: Linear<B>,
    pub excite: Linear<B>,
}

/// Logistic function at the backend's own precision.
pub(crate) fn sigmoid<B: Backend, const D: usize>(x: Tensor<B, D>) -> Tensor<B, D> {
    softplus(x.neg()).neg().exp()
}

impl<B: Backend> SeBlock<B> {
    pub fn new(channels: usize, reduction: usize, init: &mut XavierInit, device: &B::Device) -> Self {
        let h = se_hidden(channels, reduction);
        SeBlock {
            squeeze: init.linear(LinearConfig::new(channels, h), device),
            excite: init.linear(LinearConfig::new(h, channels), device),
        }
    }

    pub fn channels(&self) -> usize {
        self.squeeze.weight.dims()[0]
    }

    /// Per-channel gates in (0, 1), shape `(batch, channels)`.
    pub fn gates(&self, x: Tensor<B, 4>) -> Tensor<B, 2> {
        let [b, c, _, _] = x.dims();
        let pooled = x.mean_dim(3).mean_dim(2).reshape([b, c]);
        sigmoid(self.excite.forward(relu(self.squeeze.forward(pooled))))
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let [b, c, _, _] = x.dims();
        let g = self.gates(x.clone()).reshape([b, c, 1, 1]);
        x * g
    }
}

/// Checked form of [`SeBlock::forward`].
pub fn se_recalibrate<B: Backend>(x: Tensor<B, 4>, se: &SeBlock<B>) -> Result<Tensor<B, 4>> {
    let c = x.dims()[1];
    if c != se.channels() {
        return Err(Error::Config(format!(
            "SE block expects {} channels, input has {c}",
            se.channels()
        )));
    }
    Ok(se.forward(x))
}
