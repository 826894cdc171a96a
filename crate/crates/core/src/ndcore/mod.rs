//! Dense `f64` tensors and deterministic random streams.

mod rng;
mod tensor;

pub use rng::{mix_seed, RngStream};
pub use tensor::Tensor;
