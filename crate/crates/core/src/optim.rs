//! SGD with momentum and coupled weight decay.
//!
//! Update rule per parameter:
//!
//! ```text
//! v <- momentum * v + g + weight_decay * w
//! w <- w - learning_rate * v
//! ```

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Optimizer and focal-loss hyperparameters. Defaults are lr 0.01, weight
/// decay 0.0001, momentum 0.9, gamma 2 and alpha 0.25.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub steps: usize,
    pub batch_size: usize,
    /// Linear learning-rate warmup length; 0 disables warmup.
    pub warmup_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0001,
            gamma: 2.0,
            alpha: 0.25,
            steps: 2000,
            batch_size: 8,
            warmup_steps: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum", "must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight_decay", "must be non-negative"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        Ok(())
    }

    /// Learning rate at zero-based `step`, including warmup.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.learning_rate * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            self.learning_rate
        }
    }
}

/// Velocity buffers, keyed like the parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SgdState<T> {
    pub velocity: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new() -> Self {
        SgdState {
            velocity: BTreeMap::new(),
        }
    }
}

/// One in-place update of every parameter. Missing velocity buffers start at
/// zero; a parameter without a gradient is an error.
pub fn sgd_step<T: Scalar>(
    params: &mut BTreeMap<String, Tensor<T>>,
    grads: &BTreeMap<String, Tensor<T>>,
    state: &mut SgdState<T>,
    learning_rate: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let lr = T::of(learning_rate);
    let mom = T::of(cfg.momentum);
    let wd = T::of(cfg.weight_decay);
    for (name, w) in params.iter_mut() {
        let g = grads.get(name).ok_or_else(|| Error::MissingParam(name.clone()))?;
        w.same_shape(g, "sgd_step")?;
        let v = state
            .velocity
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(w.shape()));
        v.same_shape(w, "sgd_step")?;
        for ((wi, &gi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = mom * *vi + gi + wd * *wi;
            *wi -= lr * *vi;
        }
    }
    Ok(())
}
