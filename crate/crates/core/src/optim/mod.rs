//! Optimizers, learning-rate schedules and the training loop.

mod schedule;
mod step;
mod train;

pub use schedule::Schedule;
pub use step::{adam_step, sgd_step, AdamConfig, OptimState, Optimizer};
pub use train::{train, Combiner, TrainConfig, TrialRecord, TrialSeeds, KEEP_FRACTION_EVERY};
