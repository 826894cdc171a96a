//! Gradient-combination strategies over several per-task gradients that
//! share one variable: GradDrop and the baselines it is compared against.

mod graddrop;
mod gradnorm;
mod mgda;
mod pcgrad;

pub use graddrop::{
    activation, batch_marginalize, graddrop, purity, sample_masks, GradDropConfig, MaskSet,
};
pub use gradnorm::{gradnorm_step, weighted_sum, GradNormConfig};
pub use mgda::{mgda_minnorm, MgdaConfig, MinNormSolution};
pub use pcgrad::{pcgrad, project_conflicting};

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Per-task gradients over one shared variable.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGradients {
    grads: Vec<Tensor>,
    batch_separated: bool,
    activations: Option<Tensor>,
}

impl TaskGradients {
    pub fn new(grads: Vec<Tensor>) -> Result<Self> {
        Self::build(grads, None, false)
    }

    /// Gradients taken at a layer of activations `A`. When `batch_separated`
    /// is set, the leading axis of every tensor is the batch axis.
    pub fn with_activations(
        grads: Vec<Tensor>,
        activations: Tensor,
        batch_separated: bool,
    ) -> Result<Self> {
        Self::build(grads, Some(activations), batch_separated)
    }

    fn build(grads: Vec<Tensor>, activations: Option<Tensor>, batch_separated: bool) -> Result<Self> {
        let first = grads
            .first()
            .ok_or_else(|| Error::Contract("at least one task gradient is required".into()))?;
        if let Some(g) = grads.iter().find(|g| g.shape() != first.shape()) {
            return Err(Error::Shape(format!(
                "task gradients disagree on shape: {:?} vs {:?}",
                first.shape(),
                g.shape()
            )));
        }
        if let Some(a) = &activations {
            if a.shape() != first.shape() {
                return Err(Error::Shape(format!(
                    "activations {:?} do not match gradients {:?}",
                    a.shape(),
                    first.shape()
                )));
            }
        }
        if batch_separated && first.rank() == 0 {
            return Err(Error::Shape("batch-separated gradients need a batch axis".into()));
        }
        Ok(Self {
            grads,
            batch_separated,
            activations,
        })
    }

    /// Batch-separated flag without attached activations. `graddrop` rejects
    /// this combination; it exists so that the contract can be exercised.
    pub fn batch_separated_unchecked(grads: Vec<Tensor>) -> Result<Self> {
        let mut tg = Self::new(grads)?;
        tg.batch_separated = true;
        Ok(tg)
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn n_tasks(&self) -> usize {
        self.grads.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.grads[0].shape()
    }

    pub fn batch_separated(&self) -> bool {
        self.batch_separated
    }

    pub fn activations(&self) -> Option<&Tensor> {
        self.activations.as_ref()
    }
}

/// Plain sum of all task gradients.
pub fn naive_sum(tg: &TaskGradients) -> Tensor {
    let mut out = Tensor::zeros(tg.shape());
    for g in tg.grads() {
        out.add_assign(g).expect("shapes validated on construction");
    }
    out
}

/// Rescales `g` onto the L2 ball of radius `max_norm` when it lies outside.
pub fn clip_global_norm(g: &Tensor, max_norm: f64) -> Result<Tensor> {
    if !(max_norm > 0.0) {
        return Err(Error::Config(format!("clip norm must be positive, got {max_norm}")));
    }
    let norm = g.l2_norm();
    if norm > max_norm {
        Ok(g.scale(max_norm / norm))
    } else {
        Ok(g.clone())
    }
}
