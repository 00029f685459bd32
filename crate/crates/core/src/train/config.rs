use serde::{Deserialize, Serialize};

use crate::data::Resolution;
use crate::error::{Error, Result};
use crate::objectives::{GanMode, LossWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub resolution: Resolution,
    /// Checkpoint every this many epochs; the final epoch is always saved.
    pub checkpoint_every: usize,
    pub loss: LossWeights,
    pub gan_mode: GanMode,
    /// MS-SSIM scales in the loss; `None` uses as many as fit.
    pub ms_ssim_scales: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_g: 2e-4,
            lr_d: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 2,
            epochs: 200,
            seed: 0,
            resolution: Resolution::R256,
            checkpoint_every: 50,
            loss: LossWeights::default(),
            gan_mode: GanMode::Bce,
            ms_ssim_scales: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return bad(format!("learning rates must be positive (lr_g={}, lr_d={})", self.lr_g, self.lr_d));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad(format!("betas must lie in [0, 1) (beta1={}, beta2={})", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.checkpoint_every < 1 {
            return bad("checkpoint_every must be at least 1".into());
        }
        self.loss.validate()
    }

    /// Optimizer steps for `n` training samples.
    pub fn total_steps(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::default();
        assert_eq!((c.lr_g, c.lr_d, c.beta1, c.beta2, c.batch_size, c.epochs), (2e-4, 2e-4, 0.5, 0.999, 2, 200));
        assert!(c.validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { lr_d: 0.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..c.clone() }.validate().is_err());
        assert_eq!(TrainConfig { epochs: 3, ..c }.total_steps(8), 12);
    }
}
