use serde::{Deserialize, Serialize};

use super::TaskGradients;
use crate::error::Result;
use crate::ndcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgdaConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for MgdaConfig {
    fn default() -> Self {
        Self {
            max_iters: 250,
            tol: 1e-9,
        }
    }
}

/// Result of the min-norm solve.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNormSolution {
    pub weights: Vec<f64>,
    pub combined: Tensor,
    /// Frank-Wolfe duality gap at exit, `v.v - min_t v.g_t`.
    pub gap: f64,
    pub iterations: usize,
}

/// Minimum-norm point of the convex hull of the task gradients.
///
/// Frank-Wolfe on the simplex over the Gram matrix with exact line search.
/// Away steps are taken whenever they promise more progress than the
/// toward step, which removes the zig-zagging of plain Frank-Wolfe when
/// the optimum sits on a face of the simplex.
pub fn mgda_minnorm(tg: &TaskGradients, cfg: MgdaConfig) -> Result<MinNormSolution> {
    let n = tg.n_tasks();
    let flat: Vec<&[f64]> = tg.grads().iter().map(|g| g.data()).collect();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let d: f64 = flat[i].iter().zip(flat[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = d;
            gram[j][i] = d;
        }
    }

    let mut weights = vec![1.0 / n as f64; n];
    let trace: f64 = (0..n).map(|i| gram[i][i]).sum();
    if trace == 0.0 {
        return Ok(MinNormSolution {
            weights,
            combined: Tensor::zeros(tg.shape()),
            gap: 0.0,
            iterations: 0,
        });
    }

    // mg[t] = v . g_t, vv = v . v with v = sum_i w_i g_i
    let mut mg: Vec<f64> = (0..n).map(|t| (0..n).map(|i| gram[t][i] * weights[i]).sum()).collect();
    let mut vv: f64 = (0..n).map(|i| weights[i] * mg[i]).sum();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let (toward, min_mg) = argmin(&mg);
        gap = vv - min_mg;
        if gap < cfg.tol {
            break;
        }
        iterations += 1;

        let (away, max_mg) = mg
            .iter()
            .enumerate()
            .filter(|(i, _)| weights[*i] > 0.0)
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        let away_gap = max_mg - vv;

        if gap >= away_gap || away == usize::MAX {
            // v <- (1 - a) v + a g_t
            let denom = vv - 2.0 * mg[toward] + gram[toward][toward];
            let a = if denom > 0.0 { ((vv - mg[toward]) / denom).clamp(0.0, 1.0) } else { 1.0 };
            for (i, w) in weights.iter_mut().enumerate() {
                *w *= 1.0 - a;
                if i == toward {
                    *w += a;
                }
            }
        } else {
            // v <- v + a (v - g_s), with a bounded so that w_s stays >= 0
            let ws = weights[away];
            let a_max = if ws < 1.0 { ws / (1.0 - ws) } else { f64::INFINITY };
            let denom = vv - 2.0 * mg[away] + gram[away][away];
            let a = if denom > 0.0 { ((mg[away] - vv) / denom).clamp(0.0, a_max) } else { a_max };
            for (i, w) in weights.iter_mut().enumerate() {
                *w *= 1.0 + a;
                if i == away {
                    *w -= a;
                }
            }
            if a == a_max {
                weights[away] = 0.0;
            }
        }

        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        for (t, m) in mg.iter_mut().enumerate() {
            *m = (0..n).map(|i| gram[t][i] * weights[i]).sum();
        }
        vv = (0..n).map(|i| weights[i] * mg[i]).sum();
    }

    let mut combined = Tensor::zeros(tg.shape());
    for (g, &w) in tg.grads().iter().zip(&weights) {
        combined.add_assign(&g.scale(w))?;
    }
    Ok(MinNormSolution {
        weights,
        combined,
        gap,
        iterations,
    })
}

fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
}
