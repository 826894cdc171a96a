use serde::{Deserialize, Serialize};

use super::TaskGradients;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradNormConfig {
    /// Restoring-force exponent on the relative training rates.
    pub alpha: f64,
    /// Step size for the task weights.
    pub lr: f64,
}

impl Default for GradNormConfig {
    fn default() -> Self {
        Self { alpha: 1.0, lr: 0.025 }
    }
}

/// One GradNorm update of the task weights.
///
/// Minimizes `sum_i |w_i G_i - mean(w G) * r_i^alpha|` over `w` with the
/// target held constant, where `G_i` is the gradient norm of task `i` and
/// `r_i` its loss ratio to the initial loss relative to the mean ratio.
/// Weights are then clamped to be nonnegative and rescaled to sum to `n`.
pub fn gradnorm_step(
    weights: &[f64],
    losses: &[f64],
    grad_norms: &[f64],
    initial_losses: &[f64],
    cfg: GradNormConfig,
) -> Result<Vec<f64>> {
    let n = weights.len();
    if losses.len() != n || grad_norms.len() != n || initial_losses.len() != n {
        return Err(Error::Config(format!(
            "gradnorm inputs must all have length {n} (losses {}, norms {}, initial {})",
            losses.len(),
            grad_norms.len(),
            initial_losses.len()
        )));
    }
    if let Some(l) = initial_losses.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Config(format!("initial losses must be positive, got {l}")));
    }

    let ratios: Vec<f64> = losses.iter().zip(initial_losses).map(|(l, l0)| l / l0).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / n as f64;
    let weighted: Vec<f64> = weights.iter().zip(grad_norms).map(|(w, g)| w * g).collect();
    let mean_weighted = weighted.iter().sum::<f64>() / n as f64;

    let mut updated: Vec<f64> = (0..n)
        .map(|i| {
            let relative = if mean_ratio > 0.0 { ratios[i] / mean_ratio } else { 1.0 };
            let target = mean_weighted * relative.powf(cfg.alpha);
            let diff = weighted[i] - target;
            let grad = if diff > 0.0 {
                grad_norms[i]
            } else if diff < 0.0 {
                -grad_norms[i]
            } else {
                0.0
            };
            (weights[i] - cfg.lr * grad).max(0.0)
        })
        .collect();

    let total: f64 = updated.iter().sum();
    if total > 0.0 {
        updated.iter_mut().for_each(|w| *w *= n as f64 / total);
    } else {
        updated.iter_mut().for_each(|w| *w = 1.0);
    }
    Ok(updated)
}

/// `sum_i w_i g_i`.
pub fn weighted_sum(tg: &TaskGradients, weights: &[f64]) -> Result<Tensor> {
    if weights.len() != tg.n_tasks() {
        return Err(Error::Config(format!(
            "expected {} task weights, got {}",
            tg.n_tasks(),
            weights.len()
        )));
    }
    let mut out = Tensor::zeros(tg.shape());
    for (g, &w) in tg.grads().iter().zip(weights) {
        out.add_assign(&g.scale(w))?;
    }
    Ok(out)
}
