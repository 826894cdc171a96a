use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{OptimState, Optimizer, Schedule};
use crate::combine::{
    clip_global_norm, gradnorm_step, graddrop, mgda_minnorm, naive_sum, pcgrad, weighted_sum,
    GradDropConfig, GradNormConfig, MgdaConfig,
};
use crate::error::{Error, Result};
use crate::ndcore::{RngStream, Tensor};
use crate::problems::Problem;

/// Keep fraction is logged on steps that are multiples of this.
pub const KEEP_FRACTION_EVERY: usize = 10;

/// How per-task gradients are merged at the shared layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Combiner {
    Naive,
    GradDrop(GradDropConfig),
    PcGrad { iterative: bool },
    Mgda(MgdaConfig),
    GradNorm(GradNormConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub combiner: Combiner,
    /// Global-norm clip applied to the full weight gradient.
    pub clip: Option<f64>,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub steps: usize,
}

/// Seeds of one trial: `init` draws the starting weights, `combiner`
/// keys the random stream used by GradDrop and PCGrad.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub init: u64,
    pub combiner: u64,
}

impl TrialSeeds {
    pub fn from_seed(seed: u64) -> Self {
        Self { init: seed, combiner: seed }
    }
}

/// Outcome of one optimization run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub init_seed: u64,
    pub method: String,
    pub fingerprint: String,
    /// Summed loss before every step plus the final one (`steps + 1` entries unless diverged).
    pub trajectory: Vec<f64>,
    pub final_task_losses: Vec<f64>,
    pub final_w: Vec<f64>,
    /// `(step, keep_fraction)` for GradDrop methods.
    pub keep_fraction: Vec<(usize, f64)>,
    pub wall_ms: f64,
    pub diverged: bool,
}

impl TrialRecord {
    pub fn initial_loss(&self) -> f64 {
        self.trajectory.first().copied().unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        if self.diverged {
            f64::NAN
        } else {
            self.trajectory.last().copied().unwrap_or(f64::NAN)
        }
    }

    /// Equality on everything except wall-clock time and the method label.
    pub fn same_outcome(&self, other: &TrialRecord) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.seed == other.seed
            && self.init_seed == other.init_seed
            && bits(&self.trajectory) == bits(&other.trajectory)
            && bits(&self.final_task_losses) == bits(&other.final_task_losses)
            && bits(&self.final_w) == bits(&other.final_w)
            && self.keep_fraction.len() == other.keep_fraction.len()
            && self
                .keep_fraction
                .iter()
                .zip(&other.keep_fraction)
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
            && self.diverged == other.diverged
    }
}

/// Runs one trial: evaluate, combine at the shared layer, backpropagate,
/// clip, step. Non-finite losses or gradients end the trial with
/// `diverged` set instead of failing.
pub fn train(p: &dyn Problem, cfg: &TrainConfig, seeds: TrialSeeds) -> Result<TrialRecord> {
    if cfg.steps == 0 {
        return Err(Error::Config("a trial needs at least one step".into()));
    }
    cfg.schedule.validate()?;
    if let Combiner::GradDrop(gd) = &cfg.combiner {
        gd.validate(p.n_tasks())?;
    }
    if let Some(c) = cfg.clip {
        if !(c > 0.0) {
            return Err(Error::Config(format!("clip norm must be positive, got {c}")));
        }
    }

    let started = Instant::now();
    let mut init_rng = RngStream::new(seeds.init, 0);
    let w0 = p.init(&mut init_rng);
    let mut state = OptimState::for_optimizer(Tensor::from_vec(w0), &cfg.optimizer);
    let mut rng = RngStream::new(seeds.combiner, 1);

    let n = p.n_tasks();
    let mut task_weights = vec![1.0; n];
    let mut initial_losses: Option<Vec<f64>> = None;

    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    let mut keep_fraction = Vec::new();
    let mut diverged = false;

    for step in 0..cfg.steps {
        let eval = p.evaluate(state.w.data());
        let loss = eval.total_loss();
        if !loss.is_finite() || eval.shared.grads().iter().any(|g| !g.is_finite()) {
            diverged = true;
            break;
        }
        trajectory.push(loss);

        let combined = match &cfg.combiner {
            Combiner::Naive => naive_sum(&eval.shared),
            Combiner::GradDrop(gd) => {
                let (out, masks) = graddrop(&eval.shared, gd, &mut rng)?;
                if step % KEEP_FRACTION_EVERY == 0 {
                    keep_fraction.push((step, masks.keep_fraction));
                }
                out
            }
            Combiner::PcGrad { iterative } => pcgrad(&eval.shared, &mut rng, *iterative)?,
            Combiner::Mgda(mc) => mgda_minnorm(&eval.shared, *mc)?.combined,
            Combiner::GradNorm(gn) => {
                let initial = initial_losses.get_or_insert_with(|| eval.losses.clone());
                let combined = weighted_sum(&eval.shared, &task_weights)?;
                let norms: Vec<f64> = eval.shared.grads().iter().map(Tensor::l2_norm).collect();
                task_weights = gradnorm_step(&task_weights, &eval.losses, &norms, initial, *gn)?;
                combined
            }
        };

        let mut grad = Tensor::from_vec(p.weight_gradient(state.w.data(), &eval, &combined));
        if let Some(c) = cfg.clip {
            grad = clip_global_norm(&grad, c)?;
        }
        if !grad.is_finite() {
            diverged = true;
            break;
        }
        state.apply(&grad, &cfg.optimizer, &cfg.schedule)?;
    }

    let final_task_losses = p.losses(state.w.data());
    let final_loss: f64 = final_task_losses.iter().sum();
    if !diverged {
        if final_loss.is_finite() {
            trajectory.push(final_loss);
        } else {
            diverged = true;
        }
    }

    Ok(TrialRecord {
        seed: seeds.combiner,
        init_seed: seeds.init,
        method: String::new(),
        fingerprint: String::new(),
        trajectory,
        final_task_losses,
        final_w: state.w.into_data(),
        keep_fraction,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        diverged,
    })
}
