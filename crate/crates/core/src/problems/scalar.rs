use super::{Evaluation, Problem};
use crate::combine::TaskGradients;
use crate::ndcore::{RngStream, Tensor};

/// `(frequency, phase)` pairs of the five-sine benchmark.
pub const SINE_PARAMS: [(f64, f64); 5] = [(1.0, 0.0), (1.5, 0.2), (2.0, 0.4), (2.5, 0.6), (5.0, 0.8)];

/// Initial weights are drawn uniformly from this interval.
const INIT_RANGE: f64 = 10.0;

/// One weight, task losses `sin(a x + b) + 1`.
#[derive(Clone, Debug)]
pub struct Sines {
    params: Vec<(f64, f64)>,
}

impl Sines {
    pub fn new(params: Vec<(f64, f64)>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &[(f64, f64)] {
        &self.params
    }
}

pub fn sines_problem() -> Sines {
    Sines::new(SINE_PARAMS.to_vec())
}

fn scalar_evaluation(losses: Vec<f64>, grads: impl Iterator<Item = f64>) -> Evaluation {
    let grads: Vec<Tensor> = grads.map(|g| Tensor::from_vec(vec![g])).collect();
    let n = grads.len();
    Evaluation {
        losses,
        shared: TaskGradients::new(grads).expect("at least one task"),
        private: vec![vec![0.0]; n],
    }
}

impl Problem for Sines {
    fn name(&self) -> &str {
        "sines"
    }

    fn dim(&self) -> usize {
        1
    }

    fn n_tasks(&self) -> usize {
        self.params.len()
    }

    fn losses(&self, w: &[f64]) -> Vec<f64> {
        let x = w[0];
        self.params.iter().map(|(a, b)| (a * x + b).sin() + 1.0).collect()
    }

    fn evaluate(&self, w: &[f64]) -> Evaluation {
        let x = w[0];
        scalar_evaluation(
            self.losses(w),
            self.params.iter().map(|(a, b)| a * (a * x + b).cos()),
        )
    }

    fn trunk_backprop(&self, _w: &[f64], _eval: &Evaluation, shared_grad: &Tensor) -> Vec<f64> {
        shared_grad.data().to_vec()
    }

    fn init(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![rng.uniform_range(-INIT_RANGE, INIT_RANGE)]
    }
}

/// Two quadratics `(x - c)^2` and `(x + c)^2` whose minima disagree.
#[derive(Clone, Debug)]
pub struct QuadPair {
    c: f64,
}

impl QuadPair {
    pub fn separation(&self) -> f64 {
        self.c
    }
}

pub fn quad_pair_problem(c: f64) -> QuadPair {
    QuadPair { c }
}

impl Problem for QuadPair {
    fn name(&self) -> &str {
        "quad_pair"
    }

    fn dim(&self) -> usize {
        1
    }

    fn n_tasks(&self) -> usize {
        2
    }

    fn losses(&self, w: &[f64]) -> Vec<f64> {
        let x = w[0];
        vec![(x - self.c).powi(2), (x + self.c).powi(2)]
    }

    fn evaluate(&self, w: &[f64]) -> Evaluation {
        let x = w[0];
        scalar_evaluation(
            self.losses(w),
            [2.0 * (x - self.c), 2.0 * (x + self.c)].into_iter(),
        )
    }

    fn trunk_backprop(&self, _w: &[f64], _eval: &Evaluation, shared_grad: &Tensor) -> Vec<f64> {
        shared_grad.data().to_vec()
    }

    fn init(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![rng.uniform_range(-INIT_RANGE, INIT_RANGE)]
    }
}
