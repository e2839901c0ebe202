use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer, schedule and sampling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fractions of `epochs` after which the learning rate is multiplied by `lr_decay`.
    pub milestones: Vec<f64>,
    pub lr_decay: f64,
    pub seed: u64,
    /// Side of the square training crops; a multiple of 8.
    pub patch_size: usize,
    /// Validate (and update the best checkpoint) every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 2e-4,
            betas: [0.9, 0.999],
            eps: 1e-8,
            weight_decay: 1e-4,
            epochs: 10,
            batch_size: 4,
            milestones: vec![0.5, 0.75],
            lr_decay: 0.5,
            seed: 0,
            patch_size: 64,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !self.betas.iter().all(|b| (0.0..1.0).contains(b)) {
            return bad(format!("betas must lie in [0, 1), got {:?}", self.betas));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) || !(self.lr_decay > 0.0) {
            return bad("eps and lr_decay must be positive and weight_decay non-negative".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("epochs, batch_size and eval_every must be positive".into());
        }
        if self.patch_size == 0 || !self.patch_size.is_multiple_of(8) {
            return bad(format!("patch_size must be a positive multiple of 8, got {}", self.patch_size));
        }
        let ok_range = self.milestones.iter().all(|&m| m > 0.0 && m < 1.0);
        let increasing = self.milestones.windows(2).all(|w| w[0] < w[1]);
        if !ok_range || !increasing {
            return bad(format!("milestones must be strictly increasing in (0, 1), got {:?}", self.milestones));
        }
        Ok(())
    }

    /// `lr0 · lr_decay^k` with `k` the number of milestones at or before `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self
            .milestones
            .iter()
            .filter(|&&m| epoch as f64 >= m * self.epochs as f64)
            .count();
        self.lr0 * self.lr_decay.powi(passed as i32)
    }
}
