//! Gradient Sign Dropout (GradDrop) for multi-loss optimization.
//!
//! When several losses share parameters, their gradients often disagree in
//! sign. GradDrop measures, per parameter position, how consistently the
//! task gradients agree (the *sign purity*), then samples a mask that keeps
//! only one sign at each position, choosing the dominant sign with higher
//! probability. The result is an update that is pure in sign everywhere.
//!
//! The crate is organized as:
//!
//! - [`ndcore`]: dense tensors and reproducible counter-based random streams.
//! - [`combine`]: GradDrop plus the baselines (plain sum, PCGrad and its
//!   iterative variant, MGDA min-norm, GradNorm, norm clipping).
//! - [`problems`]: multi-loss objectives with exact gradients and oracles.
//! - [`optim`]: SGD/Adam, learning-rate schedules and the training loop.
//! - [`verify`]: Monte Carlo checks of the statistical properties of GradDrop.
//! - [`runx`]: JSON experiment specs, multi-trial sweeps and CSV output.
//!
//! See the `examples/` directory for one runnable program per capability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combine;
pub mod error;
pub mod ndcore;
pub mod optim;
pub mod problems;
pub mod runx;
pub mod verify;

pub use error::{Error, Result};
