//! Seeded Xavier-uniform initialization.
//!
//! Weights are drawn from our own ChaCha stream instead of the backend's
//! global generator, so two constructions with the same seed are
//! bit-identical regardless of what else runs in the process.

use burn::module::Param;
use burn::nn::conv::{Conv2d, Conv2dConfig, ConvTranspose2d, ConvTranspose2dConfig};
use burn::nn::{Initializer, Linear, LinearConfig};
use burn::tensor::{backend::Backend, Tensor, TensorData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `gain * sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize, gain: f64) -> f64 {
    gain * (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub struct XavierInit {
    rng: ChaCha8Rng,
    gain: f64,
}

impl XavierInit {
    pub fn new(seed: u64) -> Self {
        XavierInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
            gain: 1.0,
        }
    }

    /// Independent stream for a named sub-network.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        XavierInit { rng, gain: 1.0 }
    }

    pub fn uniform<B: Backend, const D: usize>(
        &mut self,
        shape: [usize; D],
        fan_in: usize,
        fan_out: usize,
        device: &B::Device,
    ) -> Tensor<B, D> {
        let a = xavier_bound(fan_in, fan_out, self.gain);
        let n: usize = shape.iter().product();
        let values: Vec<f64> = (0..n).map(|_| self.rng.random_range(-a..a)).collect();
        Tensor::from_data(TensorData::new(values, shape), device)
    }

    pub fn conv2d<B: Backend>(&mut self, config: Conv2dConfig, device: &B::Device) -> Conv2d<B> {
        let mut conv = config.with_initializer(Initializer::Zeros).init(device);
        let shape = conv.weight.dims();
        let rf = shape[2] * shape[3];
        let w = self.uniform(shape, shape[1] * rf, shape[0] / conv.groups * rf, device);
        conv.weight = Param::from_tensor(w);
        conv
    }

    pub fn conv_transpose2d<B: Backend>(
        &mut self,
        config: ConvTranspose2dConfig,
        device: &B::Device,
    ) -> ConvTranspose2d<B> {
        let mut conv = config.with_initializer(Initializer::Zeros).init(device);
        let shape = conv.weight.dims();
        let rf = shape[2] * shape[3];
        let w = self.uniform(shape, shape[1] * rf, shape[0] / conv.groups * rf, device);
        conv.weight = Param::from_tensor(w);
        conv
    }

    pub fn linear<B: Backend>(&mut self, config: LinearConfig, device: &B::Device) -> Linear<B> {
        let mut lin = config.with_initializer(Initializer::Zeros).init(device);
        let shape = lin.weight.dims();
        let w = self.uniform(shape, shape[0], shape[1], device);
        lin.weight = Param::from_tensor(w);
        lin
    }
}
