//! Analytic gradients against central finite differences, in f64.

use burn::backend::{Autodiff, NdArray};
use burn::module::AutodiffModule;
use burn::prelude::*;
use mritrans::metrics::SsimParams;
use mritrans::model::discriminator::Discriminator;
use mritrans::model::init::XavierInit;
use mritrans::model::{se_recalibrate, DiscriminatorConfig, SeBlock};
use mritrans::objectives::{adversarial_losses, l1_loss, ms_ssim_loss, total_generator_loss, GanMode, LossWeights};
use rand::Rng;

pub const TOLERANCE: f64 = 1e-4;

type F = NdArray<f64>;
type AD = Autodiff<F>;

fn tensor<B: Backend>(v: &[f64], shape: [usize; 4]) -> Tensor<B, 4> {
    Tensor::from_data(TensorData::new(v.to_vec(), shape), &Default::default())
}

fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = super::rng(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

fn scalar<B: Backend>(t: Tensor<B, 1>) -> f64 {
    t.into_scalar().elem::<f64>()
}

fn analytic(loss: impl Fn(Tensor<AD, 4>) -> Tensor<AD, 1>, x: &[f64], shape: [usize; 4]) -> Vec<f64> {
    let xt = tensor::<AD>(x, shape).require_grad();
    let grads = loss(xt.clone()).backward();
    xt.grad(&grads).unwrap().into_data().to_vec::<f64>().unwrap()
}

/// Worst relative error over `coords`, plus the directional derivative along
/// each of `dirs` random directions (covers every coordinate at once).
fn check(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    grad: &[f64],
    coords: &[usize],
    dirs: u64,
    h: f64,
) -> f64 {
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for &i in coords {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        let fd = (f(&p) - f(&m)) / (2.0 * h);
        worst = worst.max(rel(grad[i], fd));
    }
    for d in 0..dirs {
        let v = uniform(1000 + d, x.len(), -1.0, 1.0);
        let p: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let m: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (f(&p) - f(&m)) / (2.0 * h);
        let an: f64 = grad.iter().zip(&v).map(|(g, b)| g * b).sum();
        worst = worst.max(rel(an, fd));
    }
    worst
}

/// Worst relative error of the SE recalibration gradient.
pub fn se_recalibrate_error() -> f64 {
    let shape = [1, 4, 2, 2];
    let dev = Default::default();
    let se = SeBlock::<AD>::new(4, 2, &mut XavierInit::new(11), &dev);
    let se_inner = se.valid();
    let x = uniform(1, 16, -1.0, 1.0);
    let w = uniform(2, 16, -1.0, 1.0);

    let g = analytic(|t| (se_recalibrate(t, &se).unwrap() * tensor::<AD>(&w, shape)).sum(), &x, shape);
    let f = |v: &[f64]| scalar((se_recalibrate(tensor::<F>(v, shape), &se_inner).unwrap() * tensor::<F>(&w, shape)).sum());
    let all: Vec<usize> = (0..16).collect();
    check(f, &x, &g, &all, 4, 1e-6)
}

/// Worst relative error of the full generator objective's gradient with
/// respect to the generated image, on a 32 px input.
pub fn total_generator_loss_error() -> f64 {
    let shape = [1, 3, 32, 32];
    let n = 3 * 32 * 32;
    let dev = Default::default();
    let dcfg = DiscriminatorConfig::default().with_base_channels(4);
    let disc = Discriminator::<AD>::new(&dcfg, 5, &dev).unwrap();
    let disc_inner = disc.valid();
    let src = uniform(3, n, -1.0, 1.0);
    let tgt = uniform(4, n, -1.0, 1.0);
    let gen = uniform(5, n, -0.9, 0.9);
    let params = SsimParams::unit_range();
    let weights = LossWeights::default();

    fn loss<B: Backend>(
        d: &Discriminator<B>,
        src: &[f64],
        tgt: &[f64],
        gen: Tensor<B, 4>,
        p: &SsimParams,
        w: &LossWeights,
    ) -> Tensor<B, 1> {
        let shape = [1, 3, 32, 32];
        let (s, t) = (tensor::<B>(src, shape), tensor::<B>(tgt, shape));
        let (adv, _) = adversarial_losses(d, s, t.clone(), gen.clone(), GanMode::Bce).unwrap();
        let l1 = l1_loss(gen.clone(), t.clone()).unwrap();
        // two scales are all a 32 px image admits
        let ms = ms_ssim_loss(gen, t, p, Some(2)).unwrap();
        total_generator_loss(adv, l1, ms, w).unwrap().0
    }

    let g = analytic(|t| loss(&disc, &src, &tgt, t, &params, &weights), &gen, shape);
    let f = |v: &[f64]| scalar(loss(&disc_inner, &src, &tgt, tensor::<F>(v, shape), &params, &weights));
    let mut r = super::rng(6);
    let coords: Vec<usize> = (0..96).map(|_| r.random_range(0..n)).collect();
    check(f, &gen, &g, &coords, 4, 1e-5)
}

