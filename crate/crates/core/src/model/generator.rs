//! Residual encoder feeding a nested (or plain) U-Net decoder.

use std::collections::HashMap;

use burn::module::Ignored;
use burn::nn::conv::{Conv2d, Conv2dConfig};
use burn::prelude::*;
use burn::tensor::activation::tanh;

use super::blocks::{cat_channels, ConvBlock, ResidualBlock, Upsample};
use super::conv::conv2d;
use super::config::{EncoderKind, FusionNodeId, GeneratorConfig};
use super::init::XavierInit;
use crate::error::{Error, Result};

/// Decoder node `X_{i,j}`: upsample the deeper input, concatenate with the
/// same-level inputs, convolve.
#[derive(Module, Debug)]
pub struct FusionNode<B: Backend> {
    pub up: Upsample<B>,
    pub block: ConvBlock<B>,
}

#[derive(Module, Debug)]
pub struct Generator<B: Backend> {
    /// `X_{0,0}..X_{L,0}`.
    pub encoder: Vec<ResidualBlock<B>>,
    /// Decoder nodes in `config.decoder_nodes()` order.
    pub nodes: Vec<FusionNode<B>>,
    pub head: Conv2d<B>,
    pub config: Ignored<GeneratorConfig>,
}

/// Feature maps keyed by grid position.
pub type FeatureMaps<B> = HashMap<FusionNodeId, Tensor<B, 4>>;

impl<B: Backend> Generator<B> {
    /// Encoder and head weights are drawn before the decoder, so two
    /// configurations that share an encoder kind and seed differ only in
    /// decoder parameters.
    pub fn new(config: &GeneratorConfig, seed: u64, device: &B::Device) -> Result<Self> {
        config.validate()?;
        let mut init = XavierInit::new(seed);
        let se = match config.encoder {
            EncoderKind::SeResidual => Some(config.se_reduction),
            EncoderKind::PlainResidual => None,
        };
        let encoder = (0..=config.depth)
            .map(|i| {
                let c_in = if i == 0 { 3 } else { config.channels(i - 1) };
                let stride = if i == 0 { 1 } else { 2 };
                ResidualBlock::new(c_in, config.channels(i), stride, se, &mut init, device)
            })
            .collect();
        let head = init.conv2d(Conv2dConfig::new([config.channels(0), 3], [1, 1]), device);
        let nodes = config
            .decoder_nodes()
            .into_iter()
            .map(|id| {
                let c = config.channels(id.i);
                let below = config.channels(id.i + 1);
                let c_in = c * config.same_level_inputs(id).len() + c;
                FusionNode {
                    up: Upsample::new(config.upsample, below, c, &mut init, device),
                    block: ConvBlock::new(c_in, c, &mut init, device),
                }
            })
            .collect();
        Ok(Generator {
            encoder,
            nodes,
            head,
            config: Ignored(config.clone()),
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config.0
    }

    fn check_input(&self, x: &Tensor<B, 4>) -> Result<()> {
        let [_, c, h, w] = x.dims();
        if c != 3 {
            return Err(Error::Shape(format!("generator expects 3 input channels, got {c}")));
        }
        if h != w {
            return Err(Error::Shape(format!("generator expects square inputs, got {h}x{w}")));
        }
        self.config().check_input_size(h)
    }

    /// `X_{0,0}..X_{L,0}`.
    pub fn encode(&self, x: Tensor<B, 4>) -> Result<Vec<Tensor<B, 4>>> {
        self.check_input(&x)?;
        let mut feats = Vec::with_capacity(self.encoder.len());
        let mut h = x;
        for block in &self.encoder {
            h = block.forward(h);
            feats.push(h.clone());
        }
        Ok(feats)
    }

    /// Computes one decoder node from already-computed maps.
    pub fn fusion_node(&self, id: FusionNodeId, maps: &FeatureMaps<B>) -> Result<Tensor<B, 4>> {
        let cfg = self.config();
        let pos = cfg
            .decoder_nodes()
            .iter()
            .position(|&n| n == id)
            .ok_or_else(|| Error::Topology(format!("{id} is not a decoder node of {}", cfg.label())))?;
        let fetch = |n: FusionNodeId| {
            maps.get(&n)
                .cloned()
                .ok_or_else(|| Error::Topology(format!("{id} needs {n}, which has not been computed")))
        };
        let node = &self.nodes[pos];
        let mut parts = cfg
            .same_level_inputs(id)
            .into_iter()
            .map(fetch)
            .collect::<Result<Vec<_>>>()?;
        parts.push(node.up.forward(fetch(cfg.below_input(id))?));
        Ok(node.block.forward(cat_channels(parts)))
    }

    /// Output plus every intermediate map.
    pub fn forward_features(&self, x: Tensor<B, 4>) -> Result<(Tensor<B, 4>, FeatureMaps<B>)> {
        let mut maps: FeatureMaps<B> = self
            .encode(x)?
            .into_iter()
            .enumerate()
            .map(|(i, t)| (FusionNodeId::new(i, 0), t))
            .collect();
        for id in self.config().decoder_nodes() {
            let out = self.fusion_node(id, &maps)?;
            maps.insert(id, out);
        }
        let top = maps[&self.config().output_node()].clone();
        Ok((tanh(conv2d(&self.head, top)), maps))
    }

    pub fn forward(&self, x: Tensor<B, 4>) -> Result<Tensor<B, 4>> {
        Ok(self.forward_features(x)?.0)
    }

    /// Channel-mean maps `(batch, h, w)` for the requested nodes, in request order.
    pub fn dump_feature_maps(
        &self,
        x: Tensor<B, 4>,
        nodes: &[FusionNodeId],
    ) -> Result<Vec<(FusionNodeId, Tensor<B, 3>)>> {
        let cfg = self.config();
        if let Some(bad) = nodes.iter().find(|&&n| !cfg.has_node(n)) {
            return Err(Error::Topology(format!(
                "node {bad} does not exist in {} with depth {}",
                cfg.label(),
                cfg.depth
            )));
        }
        let (_, maps) = self.forward_features(x)?;
        Ok(nodes
            .iter()
            .map(|&n| (n, maps[&n].clone().mean_dim(1).squeeze::<3>(1)))
            .collect())
    }
}

/// The encoder stages shown in feature panels: `x_{1,0}..x_{L,0}`.
pub fn encoder_panel_nodes(config: &GeneratorConfig) -> Vec<FusionNodeId> {
    (1..=config.depth).map(|i| FusionNodeId::new(i, 0)).collect()
}

/// The top-row decoder stages: `x_{0,1}..x_{0,L}`.
pub fn decoder_panel_nodes(config: &GeneratorConfig) -> Vec<FusionNodeId> {
    (1..=config.depth).map(|j| FusionNodeId::new(0, j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{DecoderKind, SkipDensity, UpsampleKind};
    use burn::backend::NdArray;
    use burn::tensor::Distribution;

    type B = NdArray<f32>;

    fn small(enc: EncoderKind, dec: DecoderKind) -> GeneratorConfig {
        GeneratorConfig::new(enc, dec).with_base_channels(4)
    }

    #[test]
    fn encoder_sizes() {
        let dev = Default::default();
        let g = Generator::<B>::new(&small(EncoderKind::SeResidual, DecoderKind::Unetpp), 1, &dev).unwrap();
        let feats = g.encode(Tensor::zeros([1, 3, 128, 128], &dev)).unwrap();
        let sizes: Vec<usize> = feats.iter().map(|f| f.dims()[2]).collect();
        assert_eq!(sizes, [128, 64, 32, 16, 8]);
        let chans: Vec<usize> = feats.iter().map(|f| f.dims()[1]).collect();
        assert_eq!(chans, [4, 8, 16, 32, 64]);
        let err = g.encode(Tensor::zeros([1, 3, 100, 100], &dev)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn forward_shape_and_range() {
        let dev = Default::default();
        for dec in [DecoderKind::Unet, DecoderKind::Unetpp] {
            let g = Generator::<B>::new(&small(EncoderKind::SeResidual, dec), 2, &dev).unwrap();
            let x = Tensor::<B, 4>::random([2, 3, 64, 64], Distribution::Uniform(-1.0, 1.0), &dev);
            let y = g.forward(x).unwrap();
            assert_eq!(y.dims(), [2, 3, 64, 64]);
            let v: Vec<f32> = y.into_data().to_vec().unwrap();
            assert!(v.iter().all(|&t| t > -1.0 && t < 1.0));
        }
    }

    #[test]
    fn variants_build_and_run() {
        let dev = Default::default();
        for (skip, up) in [
            (SkipDensity::PreviousOnly, UpsampleKind::Transposed),
            (SkipDensity::Dense, UpsampleKind::Bilinear),
        ] {
            let cfg = GeneratorConfig {
                skip_density: skip,
                upsample: up,
                ..small(EncoderKind::PlainResidual, DecoderKind::Unetpp)
            }
            .with_depth(2);
            let g = Generator::<B>::new(&cfg, 3, &dev).unwrap();
            let y = g.forward(Tensor::ones([1, 3, 16, 16], &dev)).unwrap();
            assert_eq!(y.dims(), [1, 3, 16, 16]);
        }
    }

    #[test]
    fn feature_dumps() {
        let dev = Default::default();
        let cfg = small(EncoderKind::SeResidual, DecoderKind::Unetpp);
        let g = Generator::<B>::new(&cfg, 4, &dev).unwrap();
        let x = Tensor::<B, 4>::zeros([1, 3, 64, 64], &dev);
        let enc = g.dump_feature_maps(x.clone(), &encoder_panel_nodes(&cfg)).unwrap();
        let sizes: Vec<[usize; 3]> = enc.iter().map(|(_, t)| t.dims()).collect();
        assert_eq!(sizes, [[1, 32, 32], [1, 16, 16], [1, 8, 8], [1, 4, 4]]);
        let dec = g.dump_feature_maps(x.clone(), &decoder_panel_nodes(&cfg)).unwrap();
        assert!(dec.iter().all(|(_, t)| t.dims() == [1, 64, 64]));

        let unet = small(EncoderKind::SeResidual, DecoderKind::Unet);
        let g = Generator::<B>::new(&unet, 4, &dev).unwrap();
        let err = g.dump_feature_maps(x, &[FusionNodeId::new(0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn missing_predecessor_is_topology_error() {
        let dev = Default::default();
        let g = Generator::<B>::new(&small(EncoderKind::PlainResidual, DecoderKind::Unetpp), 1, &dev).unwrap();
        let err = g.fusion_node(FusionNodeId::new(0, 1), &HashMap::new()).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }
}
