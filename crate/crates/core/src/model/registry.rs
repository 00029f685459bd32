//! Dotted parameter names, e.g. `decoder.x_1_3.up.weight`.

use burn::module::Param;
use burn::nn::conv::{Conv2d, ConvTranspose2d};
use burn::nn::{InstanceNorm, Linear};
use burn::prelude::*;

use super::blocks::{ConvBlock, ResidualBlock, Upsample};
use super::config::{EncoderKind, FusionNodeId};
use super::discriminator::{DiscBlock, Discriminator};
use super::generator::{FusionNode, Generator};
use super::se::{se_param_count, SeBlock};
use crate::model::config::GeneratorConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl NamedParam {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

pub trait NamedParams {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>);

    fn named_params(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn push<B: Backend, const D: usize>(out: &mut Vec<NamedParam>, prefix: &str, name: &str, p: &Param<Tensor<B, D>>) {
    let t = p.val();
    out.push(NamedParam {
        name: join(prefix, name),
        shape: t.dims().to_vec(),
        values: t.into_data().convert::<f64>().to_vec().expect("float tensor"),
    });
}

impl<B: Backend> NamedParams for Conv2d<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "weight", &self.weight);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b);
        }
    }
}

impl<B: Backend> NamedParams for ConvTranspose2d<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "weight", &self.weight);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b);
        }
    }
}

impl<B: Backend> NamedParams for Linear<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        push(out, prefix, "weight", &self.weight);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b);
        }
    }
}

impl<B: Backend> NamedParams for InstanceNorm<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        if let Some(g) = &self.gamma {
            push(out, prefix, "gamma", g);
        }
        if let Some(b) = &self.beta {
            push(out, prefix, "beta", b);
        }
    }
}

impl<T: NamedParams> NamedParams for Option<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        if let Some(m) = self {
            m.collect(prefix, out);
        }
    }
}

impl<B: Backend> NamedParams for SeBlock<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.squeeze.collect(&join(prefix, "squeeze"), out);
        self.excite.collect(&join(prefix, "excite"), out);
    }
}

impl<B: Backend> NamedParams for ResidualBlock<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.conv1.collect(&join(prefix, "conv1"), out);
        self.norm1.collect(&join(prefix, "norm1"), out);
        self.conv2.collect(&join(prefix, "conv2"), out);
        self.norm2.collect(&join(prefix, "norm2"), out);
        self.shortcut.collect(&join(prefix, "shortcut"), out);
        self.se.collect(&join(prefix, "se"), out);
    }
}

impl<B: Backend> NamedParams for ConvBlock<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.conv1.collect(&join(prefix, "conv1"), out);
        self.norm1.collect(&join(prefix, "norm1"), out);
        self.conv2.collect(&join(prefix, "conv2"), out);
        self.norm2.collect(&join(prefix, "norm2"), out);
    }
}

impl<B: Backend> NamedParams for Upsample<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.transposed.collect(prefix, out);
        self.project.collect(&join(prefix, "project"), out);
    }
}

impl<B: Backend> NamedParams for FusionNode<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.up.collect(&join(prefix, "up"), out);
        self.block.collect(&join(prefix, "block"), out);
    }
}

impl<B: Backend> NamedParams for Generator<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (i, block) in self.encoder.iter().enumerate() {
            block.collect(&join(prefix, &format!("encoder.{}", FusionNodeId::new(i, 0))), out);
        }
        for (id, node) in self.config().decoder_nodes().iter().zip(&self.nodes) {
            node.collect(&join(prefix, &format!("decoder.{id}")), out);
        }
        self.head.collect(&join(prefix, "head"), out);
    }
}

impl<B: Backend> NamedParams for DiscBlock<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        self.conv.collect(&join(prefix, "conv"), out);
        self.norm.collect(&join(prefix, "norm"), out);
    }
}

impl<B: Backend> NamedParams for Discriminator<B> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (k, b) in self.blocks.iter().enumerate() {
            b.collect(&join(prefix, &format!("blocks.{k}")), out);
        }
        self.head.collect(&join(prefix, "head"), out);
    }
}

/// Parameters SE gating adds to the encoder of `config`, summed over stages.
pub fn se_overhead(config: &GeneratorConfig) -> usize {
    (0..=config.depth)
        .map(|i| se_param_count(config.channels(i), config.se_reduction))
        .sum()
}

/// Same-structure configuration with the other encoder kind.
pub fn toggle_se(config: &GeneratorConfig) -> GeneratorConfig {
    let encoder = match config.encoder {
        EncoderKind::SeResidual => EncoderKind::PlainResidual,
        EncoderKind::PlainResidual => EncoderKind::SeResidual,
    };
    GeneratorConfig {
        encoder,
        ..config.clone()
    }
}
