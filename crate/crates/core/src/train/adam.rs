//! Adam with bias correction, hyperparameters kept in `f64`.

use burn::optim::adaptor::OptimizerAdaptor;
use burn::optim::SimpleOptimizer;
use burn::prelude::*;
use burn::record::Record;
use burn::tensor::backend::AutodiffBackend;
use burn::LearningRate;
use burn::module::AutodiffModule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Record, Clone)]
pub struct AdamState<B: Backend, const D: usize> {
    pub time: usize,
    pub moment1: Tensor<B, D>,
    pub moment2: Tensor<B, D>,
}

impl<B: Backend> SimpleOptimizer<B> for Adam {
    type State<const D: usize> = AdamState<B, D>;

    fn step<const D: usize>(
        &self,
        lr: LearningRate,
        tensor: Tensor<B, D>,
        grad: Tensor<B, D>,
        state: Option<Self::State<D>>,
    ) -> (Tensor<B, D>, Option<Self::State<D>>) {
        let (time, m, v) = match state {
            Some(s) => (s.time, s.moment1, s.moment2),
            None => (0, grad.zeros_like(), grad.zeros_like()),
        };
        let time = time + 1;
        let m = m * self.beta1 + grad.clone() * (1.0 - self.beta1);
        let v = v * self.beta2 + grad.powf_scalar(2.0) * (1.0 - self.beta2);
        let c1 = 1.0 - self.beta1.powi(time as i32);
        let c2 = 1.0 - self.beta2.powi(time as i32);
        let m_hat = m.clone() / c1;
        let v_hat = v.clone() / c2;
        let delta = m_hat / (v_hat.sqrt() + self.epsilon) * lr;
        let state = AdamState {
            time,
            moment1: m,
            moment2: v,
        };
        (tensor - delta, Some(state))
    }

    fn to_device<const D: usize>(mut state: Self::State<D>, device: &B::Device) -> Self::State<D> {
        state.moment1 = state.moment1.to_device(device);
        state.moment2 = state.moment2.to_device(device);
        state
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam { beta1, beta2, epsilon }
    }

    pub fn init<B: AutodiffBackend, M: AutodiffModule<B>>(self) -> OptimizerAdaptor<Adam, M, B> {
        OptimizerAdaptor::from(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use burn::backend::{Autodiff, NdArray};
    use burn::module::Param;
    use burn::optim::{GradientsParams, Optimizer};

    type B = Autodiff<NdArray<f64>>;

    #[derive(Module, Debug)]
    struct Scalar<B: Backend> {
        theta: Param<Tensor<B, 1>>,
    }

    /// Closed-form Adam on `f(x) = a (x - c)^2`.
    fn reference(x0: f64, a: f64, c: f64, lr: f64, adam: Adam, steps: usize) -> f64 {
        let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * a * (x - c);
            m = adam.beta1 * m + (1.0 - adam.beta1) * g;
            v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
            let mh = m / (1.0 - adam.beta1.powi(t as i32));
            let vh = v / (1.0 - adam.beta2.powi(t as i32));
            x -= lr * mh / (vh.sqrt() + adam.epsilon);
        }
        x
    }

    fn run(steps: usize) -> f64 {
        let dev = Default::default();
        let (a, c, lr) = (1.5, 0.25, 2e-4);
        let mut model = Scalar::<B> {
            theta: Param::from_tensor(Tensor::from_floats([3.0], &dev)),
        };
        let mut opt = Adam::default().init::<B, Scalar<B>>();
        for _ in 0..steps {
            let loss = (model.theta.val() - c).powf_scalar(2.0).sum() * a;
            let grads = GradientsParams::from_grads(loss.backward(), &model);
            model = opt.step(lr, model, grads);
        }
        let got: f64 = model.theta.val().into_scalar();
        let want = reference(3.0, a, c, lr, Adam::default(), steps);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        got
    }

    #[test]
    fn one_step_matches_closed_form() {
        let x = run(1);
        // First step moves by lr * sign(g) up to epsilon.
        assert!((x - (3.0 - 2e-4)).abs() < 1e-10);
    }

    #[test]
    fn many_steps_match_scalar_loop() {
        run(25);
    }
}
