//! Conditional PatchGAN: one logit per input patch.

use burn::module::Ignored;
use burn::nn::conv::{Conv2d, Conv2dConfig};
use burn::nn::{InstanceNorm, PaddingConfig2d};
use burn::prelude::*;
use burn::tensor::activation::leaky_relu;

use super::blocks::{cat_channels, instance_norm};
use super::config::DiscriminatorConfig;
use super::conv::conv2d;
use super::init::XavierInit;
use crate::error::{Error, Result};

const SLOPE: f64 = 0.2;

#[derive(Module, Debug)]
pub struct DiscBlock<B: Backend> {
    pub conv: Conv2d<B>,
    pub norm: Option<InstanceNorm<B>>,
}

#[derive(Module, Debug)]
pub struct Discriminator<B: Backend> {
    pub blocks: Vec<DiscBlock<B>>,
    pub head: Conv2d<B>,
    pub config: Ignored<DiscriminatorConfig>,
}

fn conv4<B: Backend>(c_in: usize, c_out: usize, stride: usize, init: &mut XavierInit, device: &B::Device) -> Conv2d<B> {
    init.conv2d(
        Conv2dConfig::new([c_in, c_out], [4, 4])
            .with_stride([stride, stride])
            .with_padding(PaddingConfig2d::Explicit(1, 1)),
        device,
    )
}

impl<B: Backend> Discriminator<B> {
    pub fn new(config: &DiscriminatorConfig, seed: u64, device: &B::Device) -> Result<Self> {
        config.validate()?;
        let mut init = XavierInit::new(seed);
        let mut blocks = Vec::with_capacity(config.n_down + 1);
        let mut c_in = 6;
        for k in 0..=config.n_down {
            let stride = if k < config.n_down { 2 } else { 1 };
            let c_out = config.channels(k);
            blocks.push(DiscBlock {
                conv: conv4(c_in, c_out, stride, &mut init, device),
                norm: (k > 0).then(|| instance_norm(c_out, device)),
            });
            c_in = c_out;
        }
        let head = conv4(c_in, 1, 1, &mut init, device);
        Ok(Discriminator {
            blocks,
            head,
            config: Ignored(config.clone()),
        })
    }

    /// Logits for the pair; panics on mismatched shapes, see [`Self::try_forward`].
    pub fn forward(&self, source: Tensor<B, 4>, candidate: Tensor<B, 4>) -> Tensor<B, 4> {
        let mut h = cat_channels(vec![source, candidate]);
        for b in &self.blocks {
            h = conv2d(&b.conv, h);
            if let Some(n) = &b.norm {
                h = n.forward(h);
            }
            h = leaky_relu(h, SLOPE);
        }
        conv2d(&self.head, h)
    }

    pub fn try_forward(&self, source: Tensor<B, 4>, candidate: Tensor<B, 4>) -> Result<Tensor<B, 4>> {
        let (a, b) = (source.dims(), candidate.dims());
        if a != b || a[1] != 3 {
            return Err(Error::Shape(format!(
                "discriminator inputs must both be (batch, 3, S, S); got {a:?} and {b:?}"
            )));
        }
        match self.config.0.output_size(a[2].min(a[3])) {
            Some(n) if n >= 1 => Ok(self.forward(source, candidate)),
            _ => Err(Error::Shape(format!("input {}x{} is too small for the discriminator", a[2], a[3]))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use burn::backend::NdArray;
    use burn::tensor::Distribution;

    type B = NdArray<f32>;

    fn data(t: Tensor<B, 4>) -> Vec<f32> {
        t.into_data().to_vec().unwrap()
    }

    #[test]
    fn patch_map_size() {
        let dev = Default::default();
        let d = Discriminator::<B>::new(&DiscriminatorConfig::default().with_base_channels(4), 1, &dev).unwrap();
        let x = Tensor::<B, 4>::zeros([1, 3, 256, 256], &dev);
        assert_eq!(d.try_forward(x.clone(), x).unwrap().dims(), [1, 1, 30, 30]);
        let x = Tensor::<B, 4>::zeros([2, 3, 64, 64], &dev);
        assert_eq!(d.forward(x.clone(), x).dims(), [2, 1, 6, 6]);
    }

    #[test]
    fn conditional_and_deterministic() {
        let dev = Default::default();
        let d = Discriminator::<B>::new(&DiscriminatorConfig::default().with_base_channels(8), 7, &dev).unwrap();
        let s = Tensor::<B, 4>::random([1, 3, 32, 32], Distribution::Uniform(-1.0, 1.0), &dev);
        let c = Tensor::<B, 4>::random([1, 3, 32, 32], Distribution::Uniform(-1.0, 1.0), &dev);
        let base = data(d.forward(s.clone(), c.clone()));
        assert_eq!(base, data(d.forward(s.clone(), c.clone().add_scalar(0.0))));
        let zeroed = data(d.forward(s.zeros_like(), c));
        assert!(base.iter().zip(&zeroed).any(|(a, b)| (a - b).abs() > 1e-6));
        assert!(base.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_errors() {
        let dev = Default::default();
        let d = Discriminator::<B>::new(&DiscriminatorConfig::default().with_base_channels(2), 1, &dev).unwrap();
        let a = Tensor::<B, 4>::zeros([1, 3, 32, 32], &dev);
        let b = Tensor::<B, 4>::zeros([1, 3, 16, 16], &dev);
        assert!(d.try_forward(a, b).is_err());
    }

    #[test]
    fn fewer_params_than_deeper_stack() {
        let dev = Default::default();
        let cfg = DiscriminatorConfig::default();
        let ours = Discriminator::<B>::new(&cfg, 0, &dev).unwrap().num_params();
        let deeper = DiscriminatorConfig { n_down: 4, ..cfg };
        let reference = Discriminator::<B>::new(&deeper, 0, &dev).unwrap().num_params();
        assert!(ours < reference, "{ours} vs {reference}");
    }
}
