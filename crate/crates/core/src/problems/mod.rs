//! Multi-loss objectives with analytic per-task gradients, plus the
//! finite-difference and grid-search oracles used to check them.

mod net;
mod oracle;
mod scalar;

pub use net::{mlp_multitask_problem, transfer_toy_problem, SharedTrunkNet};
pub use oracle::{finite_diff_against, finite_diff_check, grid_search_min, GridMinimum};
pub use scalar::{quad_pair_problem, sines_problem, QuadPair, Sines, SINE_PARAMS};

use crate::combine::TaskGradients;
use crate::ndcore::{RngStream, Tensor};

/// Everything the training loop needs from one forward/backward pass.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub losses: Vec<f64>,
    /// Per-task gradients at the layer where they are combined.
    pub shared: TaskGradients,
    /// Per-task gradients of task-private parameters, as full-length weight vectors.
    pub private: Vec<Vec<f64>>,
}

impl Evaluation {
    pub fn total_loss(&self) -> f64 {
        self.losses.iter().sum()
    }
}

/// A differentiable objective made of several losses over one weight vector.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn n_tasks(&self) -> usize;

    fn batch_separated(&self) -> bool {
        false
    }

    fn losses(&self, w: &[f64]) -> Vec<f64>;

    fn evaluate(&self, w: &[f64]) -> Evaluation;

    /// Pulls a gradient at the shared combination layer back to the weights.
    fn trunk_backprop(&self, w: &[f64], eval: &Evaluation, shared_grad: &Tensor) -> Vec<f64>;

    fn init(&self, rng: &mut RngStream) -> Vec<f64>;

    /// Full weight gradient for a combined shared-layer gradient; task-private
    /// parameters always receive their own task's gradient.
    fn weight_gradient(&self, w: &[f64], eval: &Evaluation, combined: &Tensor) -> Vec<f64> {
        let mut grad = self.trunk_backprop(w, eval, combined);
        for private in &eval.private {
            for (g, p) in grad.iter_mut().zip(private) {
                *g += p;
            }
        }
        grad
    }

    /// Gradient of each individual loss with respect to all weights.
    fn task_gradients(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let eval = self.evaluate(w);
        eval.shared
            .grads()
            .iter()
            .zip(&eval.private)
            .map(|(g, private)| {
                let mut full = self.trunk_backprop(w, &eval, g);
                for (a, b) in full.iter_mut().zip(private) {
                    *a += b;
                }
                full
            })
            .collect()
    }

    fn total_loss(&self, w: &[f64]) -> f64 {
        self.losses(w).iter().sum()
    }
}
