use burn::nn::conv::{Conv2d, Conv2dConfig, ConvTranspose2d, ConvTranspose2dConfig};
use burn::nn::{InstanceNorm, InstanceNormConfig, PaddingConfig2d};
use burn::prelude::*;
use burn::tensor::activation::{leaky_relu, relu};
use burn::tensor::module::interpolate;
use burn::tensor::ops::{InterpolateMode, InterpolateOptions};

use super::config::UpsampleKind;
use super::conv::{conv2d, conv_transpose2d};
use super::init::XavierInit;
use super::se::SeBlock;

pub const ENCODER_SLOPE: f64 = 0.2;

pub(crate) fn conv<B: Backend>(
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    init: &mut XavierInit,
    device: &B::Device,
) -> Conv2d<B> {
    let cfg = Conv2dConfig::new([c_in, c_out], [kernel, kernel])
        .with_stride([stride, stride])
        .with_padding(PaddingConfig2d::Explicit(kernel / 2, kernel / 2));
    init.conv2d(cfg, device)
}

/// Concatenates along channels.
///
/// `Tensor::cat` under autodiff skips untracked inputs when working out which
/// gradient slice belongs to which input, so a constant tensor placed before
/// a tracked one shifts the tracked one's gradient. Slice assignment routes
/// each side separately.
pub(crate) fn cat_channels<B: Backend>(parts: Vec<Tensor<B, 4>>) -> Tensor<B, 4> {
    let [b, _, h, w] = parts[0].dims();
    let total: usize = parts.iter().map(|p| p.dims()[1]).sum();
    let mut out = Tensor::zeros([b, total, h, w], &parts[0].device());
    let mut at = 0;
    for p in parts {
        let c = p.dims()[1];
        out = out.slice_assign([0..b, at..at + c, 0..h, 0..w], p);
        at += c;
    }
    out
}

pub(crate) fn instance_norm<B: Backend>(channels: usize, device: &B::Device) -> InstanceNorm<B> {
    InstanceNormConfig::new(channels).with_affine(true).init(device)
}

/// Encoder stage: two 3x3 convolutions with a shortcut, optional SE gating,
/// then LeakyReLU. The first convolution carries the stride.
#[derive(Module, Debug)]
pub struct ResidualBlock<B: Backend> {
    pub conv1: Conv2d<B>,
    pub norm1: InstanceNorm<B>,
    pub conv2: Conv2d<B>,
    pub norm2: InstanceNorm<B>,
    /// 1x1 projection, present when the shape changes.
    pub shortcut: Option<Conv2d<B>>,
    pub se: Option<SeBlock<B>>,
}

impl<B: Backend> ResidualBlock<B> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        stride: usize,
        se_reduction: Option<usize>,
        init: &mut XavierInit,
        device: &B::Device,
    ) -> Self {
        let conv1 = conv(c_in, c_out, 3, stride, init, device);
        let conv2 = conv(c_out, c_out, 3, 1, init, device);
        let shortcut = (c_in != c_out || stride != 1).then(|| {
            let cfg = Conv2dConfig::new([c_in, c_out], [1, 1]).with_stride([stride, stride]);
            init.conv2d(cfg, device)
        });
        let se = se_reduction.map(|r| SeBlock::new(c_out, r, init, device));
        ResidualBlock {
            conv1,
            norm1: instance_norm(c_out, device),
            conv2,
            norm2: instance_norm(c_out, device),
            shortcut,
            se,
        }
    }

    /// Block output before the final activation.
    pub fn pre_activation(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let h = leaky_relu(self.norm1.forward(conv2d(&self.conv1, x.clone())), ENCODER_SLOPE);
        let h = self.norm2.forward(conv2d(&self.conv2, h));
        let skip = match &self.shortcut {
            Some(p) => conv2d(p, x),
            None => x,
        };
        let r = h + skip;
        match &self.se {
            Some(se) => se.forward(r),
            None => r,
        }
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        leaky_relu(self.pre_activation(x), ENCODER_SLOPE)
    }
}

/// Decoder convolution unit: (3x3 conv, norm, ReLU) twice.
#[derive(Module, Debug)]
pub struct ConvBlock<B: Backend> {
    pub conv1: Conv2d<B>,
    pub norm1: InstanceNorm<B>,
    pub conv2: Conv2d<B>,
    pub norm2: InstanceNorm<B>,
}

impl<B: Backend> ConvBlock<B> {
    pub fn new(c_in: usize, c_out: usize, init: &mut XavierInit, device: &B::Device) -> Self {
        ConvBlock {
            conv1: conv(c_in, c_out, 3, 1, init, device),
            norm1: instance_norm(c_out, device),
            conv2: conv(c_out, c_out, 3, 1, init, device),
            norm2: instance_norm(c_out, device),
        }
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        let h = relu(self.norm1.forward(conv2d(&self.conv1, x)));
        relu(self.norm2.forward(conv2d(&self.conv2, h)))
    }
}

/// Doubles spatial size: a stride-2 transposed convolution, or bilinear
/// resampling followed by a 1x1 convolution.
#[derive(Module, Debug)]
pub struct Upsample<B: Backend> {
    pub transposed: Option<ConvTranspose2d<B>>,
    pub project: Option<Conv2d<B>>,
}

impl<B: Backend> Upsample<B> {
    pub fn new(kind: UpsampleKind, c_in: usize, c_out: usize, init: &mut XavierInit, device: &B::Device) -> Self {
        match kind {
            UpsampleKind::Transposed => Upsample {
                transposed: Some(init.conv_transpose2d(
                    ConvTranspose2dConfig::new([c_in, c_out], [2, 2]).with_stride([2, 2]),
                    device,
                )),
                project: None,
            },
            UpsampleKind::Bilinear => Upsample {
                transposed: None,
                project: Some(init.conv2d(Conv2dConfig::new([c_in, c_out], [1, 1]), device)),
            },
        }
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Tensor<B, 4> {
        if let Some(t) = &self.transposed {
            return conv_transpose2d(t, x);
        }
        let [_, _, h, w] = x.dims();
        let up = interpolate(
            x,
            [2 * h, 2 * w],
            InterpolateOptions::new(InterpolateMode::Bilinear),
        );
        conv2d(self.project.as_ref().expect("bilinear upsample has a projection"), up)
    }
}
