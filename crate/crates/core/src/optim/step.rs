use serde::{Deserialize, Serialize};

use super::Schedule;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_eps() -> f64 {
    AdamConfig::default().eps
}

/// Weights plus optimizer bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub w: Tensor,
    pub step: usize,
    /// First and second moments, present for adaptive optimizers.
    pub moments: Option<(Tensor, Tensor)>,
}

impl OptimState {
    pub fn new(w: Tensor) -> Self {
        Self { w, step: 0, moments: None }
    }

    pub fn with_moments(w: Tensor) -> Self {
        let zeros = Tensor::zeros(w.shape());
        Self {
            moments: Some((zeros.clone(), zeros)),
            w,
            step: 0,
        }
    }

    pub fn for_optimizer(w: Tensor, opt: &Optimizer) -> Self {
        match opt {
            Optimizer::Sgd => Self::new(w),
            Optimizer::Adam { .. } => Self::with_moments(w),
        }
    }

    pub fn apply(&mut self, g: &Tensor, opt: &Optimizer, schedule: &Schedule) -> Result<()> {
        match *opt {
            Optimizer::Sgd => sgd_step(self, g, schedule),
            Optimizer::Adam { beta1, beta2, eps } => {
                adam_step(self, g, schedule, AdamConfig { beta1, beta2, eps })
            }
        }
    }
}

fn check_shape(state: &OptimState, g: &Tensor) -> Result<()> {
    if state.w.shape() != g.shape() {
        return Err(Error::Shape(format!(
            "gradient {:?} does not match weights {:?}",
            g.shape(),
            state.w.shape()
        )));
    }
    Ok(())
}

/// `w <- w - lr(step) g`.
pub fn sgd_step(state: &mut OptimState, g: &Tensor, schedule: &Schedule) -> Result<()> {
    check_shape(state, g)?;
    let lr = schedule.lr(state.step);
    for (w, gi) in state.w.data_mut().iter_mut().zip(g.data()) {
        *w -= lr * gi;
    }
    state.step += 1;
    Ok(())
}

/// Bias-corrected adaptive moment step.
pub fn adam_step(state: &mut OptimState, g: &Tensor, schedule: &Schedule, cfg: AdamConfig) -> Result<()> {
    check_shape(state, g)?;
    let lr = schedule.lr(state.step);
    let t = (state.step + 1) as i32;
    let (m, v) = state
        .moments
        .get_or_insert_with(|| (Tensor::zeros(g.shape()), Tensor::zeros(g.shape())));
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let moments = m.data_mut().iter_mut().zip(v.data_mut());
    for ((wi, &gi), (mi, vi)) in state.w.data_mut().iter_mut().zip(g.data()).zip(moments) {
        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
        *wi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
    }
    state.step += 1;
    Ok(())
}
