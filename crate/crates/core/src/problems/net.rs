use super::{Evaluation, Problem};
use crate::combine::TaskGradients;
use crate::ndcore::{mix_seed, RngStream, Tensor};

/// One-hidden-layer tanh network with a shared trunk and one scalar
/// regression head per task, trained full-batch on a frozen dataset.
///
/// Task `t` is scored on the rows listed in `task_rows[t]`. Gradients are
/// combined at the hidden activations `H = tanh(X W1 + b1)`.
///
/// Weight layout: `W1 [inputs x hidden]`, `b1 [hidden]`, `V [hidden x tasks]`, `c [tasks]`.
#[derive(Clone, Debug)]
pub struct SharedTrunkNet {
    name: String,
    inputs: usize,
    hidden: usize,
    tasks: usize,
    rows: usize,
    x: Vec<f64>,
    targets: Vec<f64>,
    task_rows: Vec<Vec<usize>>,
    batch_separated: bool,
}

struct Forward {
    hidden: Vec<f64>,
    outputs: Vec<f64>,
}

impl SharedTrunkNet {
    /// Builds a network over an explicit dataset. `x` is `rows x inputs`,
    /// `targets` is `rows x tasks`, both row-major.
    pub fn from_data(
        name: impl Into<String>,
        inputs: usize,
        hidden: usize,
        x: Vec<f64>,
        targets: Vec<f64>,
        task_rows: Vec<Vec<usize>>,
        batch_separated: bool,
    ) -> Self {
        let tasks = task_rows.len();
        let rows = x.len() / inputs.max(1);
        assert_eq!(x.len(), rows * inputs, "x must be rows x inputs");
        assert_eq!(targets.len(), rows * tasks, "targets must be rows x tasks");
        Self {
            name: name.into(),
            inputs,
            hidden,
            tasks,
            rows,
            x,
            targets,
            task_rows,
            batch_separated,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn task_rows(&self) -> &[Vec<usize>] {
        &self.task_rows
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = w1 + self.inputs * self.hidden;
        let v = b1 + self.hidden;
        let c = v + self.hidden * self.tasks;
        (w1, b1, v, c)
    }

    fn forward(&self, w: &[f64]) -> Forward {
        let (o_w1, o_b1, o_v, o_c) = self.offsets();
        let (d, h, t) = (self.inputs, self.hidden, self.tasks);
        let mut hidden = vec![0.0; self.rows * h];
        let mut outputs = vec![0.0; self.rows * t];
        for r in 0..self.rows {
            let xr = &self.x[r * d..(r + 1) * d];
            let hr = &mut hidden[r * h..(r + 1) * h];
            for (j, hj) in hr.iter_mut().enumerate() {
                let mut z = w[o_b1 + j];
                for (i, xi) in xr.iter().enumerate() {
                    z += xi * w[o_w1 + i * h + j];
                }
                *hj = z.tanh();
            }
            for k in 0..t {
                let mut y = w[o_c + k];
                for (j, hj) in hr.iter().enumerate() {
                    y += hj * w[o_v + j * t + k];
                }
                outputs[r * t + k] = y;
            }
        }
        Forward { hidden, outputs }
    }

    fn task_losses(&self, fwd: &Forward) -> Vec<f64> {
        let t = self.tasks;
        self.task_rows
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let sq: f64 = rows
                    .iter()
                    .map(|&r| (fwd.outputs[r * t + k] - self.targets[r * t + k]).powi(2))
                    .sum();
                sq / rows.len().max(1) as f64
            })
            .collect()
    }
}

impl Problem for SharedTrunkNet {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inputs * self.hidden + self.hidden + self.hidden * self.tasks + self.tasks
    }

    fn n_tasks(&self) -> usize {
        self.tasks
    }

    fn batch_separated(&self) -> bool {
        self.batch_separated
    }

    fn losses(&self, w: &[f64]) -> Vec<f64> {
        self.task_losses(&self.forward(w))
    }

    fn evaluate(&self, w: &[f64]) -> Evaluation {
        let fwd = self.forward(w);
        let losses = self.task_losses(&fwd);
        let (_, _, o_v, o_c) = self.offsets();
        let (h, t, dim) = (self.hidden, self.tasks, self.dim());

        let mut shared = Vec::with_capacity(t);
        let mut private = Vec::with_capacity(t);
        for (k, rows) in self.task_rows.iter().enumerate() {
            let scale = 2.0 / rows.len().max(1) as f64;
            let mut dh = vec![0.0; self.rows * h];
            let mut p = vec![0.0; dim];
            for &r in rows {
                let dy = scale * (fwd.outputs[r * t + k] - self.targets[r * t + k]);
                let hr = &fwd.hidden[r * h..(r + 1) * h];
                for j in 0..h {
                    dh[r * h + j] = dy * w[o_v + j * t + k];
                    p[o_v + j * t + k] += dy * hr[j];
                }
                p[o_c + k] += dy;
            }
            shared.push(Tensor::new(vec![self.rows, h], dh).expect("rows x hidden"));
            private.push(p);
        }
        let activations = Tensor::new(vec![self.rows, h], fwd.hidden).expect("rows x hidden");
        Evaluation {
            losses,
            shared: TaskGradients::with_activations(shared, activations, self.batch_separated)
                .expect("congruent shapes"),
            private,
        }
    }

    fn trunk_backprop(&self, _w: &[f64], eval: &Evaluation, shared_grad: &Tensor) -> Vec<f64> {
        let (o_w1, o_b1, _, _) = self.offsets();
        let (d, h) = (self.inputs, self.hidden);
        let hidden = eval.shared.activations().expect("network evaluations carry activations");
        let mut grad = vec![0.0; self.dim()];
        for r in 0..self.rows {
            let xr = &self.x[r * d..(r + 1) * d];
            for j in 0..h {
                let a = hidden.data()[r * h + j];
                let dz = shared_grad.data()[r * h + j] * (1.0 - a * a);
                if dz == 0.0 {
                    continue;
                }
                grad[o_b1 + j] += dz;
                for (i, xi) in xr.iter().enumerate() {
                    grad[o_w1 + i * h + j] += xi * dz;
                }
            }
        }
        grad
    }

    fn init(&self, rng: &mut RngStream) -> Vec<f64> {
        let (o_w1, o_b1, o_v, o_c) = self.offsets();
        let mut w = vec![0.0; self.dim()];
        let s1 = 1.0 / (self.inputs as f64).sqrt();
        let s2 = 1.0 / (self.hidden as f64).sqrt();
        for x in &mut w[o_w1..o_b1] {
            *x = s1 * rng.normal();
        }
        for x in &mut w[o_v..o_c] {
            *x = s2 * rng.normal();
        }
        w
    }
}

const MLP_INPUTS: usize = 8;
const MLP_ROWS: usize = 64;
const TEACHER_LATENT: usize = 3;
const NOISE: f64 = 0.05;

/// Targets from a shared nonlinear teacher plus a task-specific linear part.
fn teacher_targets(x: &[f64], rows: usize, inputs: usize, tasks: usize, rng: &mut RngStream) -> Vec<f64> {
    let proj: Vec<f64> = (0..inputs * TEACHER_LATENT).map(|_| rng.normal() / (inputs as f64).sqrt()).collect();
    let mix: Vec<f64> = (0..TEACHER_LATENT * tasks).map(|_| rng.normal()).collect();
    let own: Vec<f64> = (0..inputs * tasks).map(|_| 0.3 * rng.normal() / (inputs as f64).sqrt()).collect();
    let mut targets = vec![0.0; rows * tasks];
    for r in 0..rows {
        let xr = &x[r * inputs..(r + 1) * inputs];
        let latent: Vec<f64> = (0..TEACHER_LATENT)
            .map(|m| (0..inputs).map(|i| xr[i] * proj[i * TEACHER_LATENT + m]).sum::<f64>().tanh())
            .collect();
        for k in 0..tasks {
            let shared: f64 = (0..TEACHER_LATENT).map(|m| latent[m] * mix[m * tasks + k]).sum();
            let linear: f64 = (0..inputs).map(|i| xr[i] * own[i * tasks + k]).sum();
            targets[r * tasks + k] = shared + linear + NOISE * rng.normal();
        }
    }
    targets
}

/// Multi-head regression network on a synthetic dataset fixed by `seed`.
pub fn mlp_multitask_problem(seed: u64, hidden: usize, n_tasks: usize) -> SharedTrunkNet {
    assert!(hidden >= 1, "hidden width must be positive");
    assert!(n_tasks >= 1, "need at least one task");
    let mut rng = RngStream::new(mix_seed(&[seed, 0x6d6c70]), 0);
    let x: Vec<f64> = (0..MLP_ROWS * MLP_INPUTS).map(|_| rng.normal()).collect();
    let targets = teacher_targets(&x, MLP_ROWS, MLP_INPUTS, n_tasks, &mut rng);
    let task_rows = vec![(0..MLP_ROWS).collect::<Vec<_>>(); n_tasks];
    SharedTrunkNet::from_data("mlp", MLP_INPUTS, hidden, x, targets, task_rows, false)
}

const TRANSFER_INPUTS: usize = 6;
const TRANSFER_HALF: usize = 32;
const TRANSFER_HIDDEN: usize = 4;

/// Source and transfer tasks on disjoint halves of one mixed batch.
///
/// Task 0 (source) is scored on rows `0..32`, task 1 (transfer) on rows
/// `32..64`. The transfer teacher is a perturbed copy of the source teacher,
/// and transfer inputs are shifted, so the two tasks are related but not
/// identical.
pub fn transfer_toy_problem(seed: u64) -> SharedTrunkNet {
    let mut rng = RngStream::new(mix_seed(&[seed, 0x7472616e73]), 0);
    let d = TRANSFER_INPUTS;
    let rows = 2 * TRANSFER_HALF;
    let mut x: Vec<f64> = (0..rows * d).map(|_| rng.normal()).collect();
    for v in &mut x[TRANSFER_HALF * d..] {
        *v += 0.5;
    }
    let proj: Vec<f64> = (0..d).map(|_| rng.normal() / (d as f64).sqrt()).collect();
    let tilt: Vec<f64> = (0..d).map(|_| 0.4 * rng.normal() / (d as f64).sqrt()).collect();
    let mut targets = vec![0.0; rows * 2];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let transfer = r >= TRANSFER_HALF;
        let z: f64 = (0..d)
            .map(|i| xr[i] * (proj[i] + if transfer { tilt[i] } else { 0.0 }))
            .sum();
        let y = (1.5 * z).tanh() + 0.3 * z + NOISE * rng.normal();
        targets[r * 2 + usize::from(transfer)] = y;
    }
    let task_rows = vec![(0..TRANSFER_HALF).collect(), (TRANSFER_HALF..rows).collect()];
    SharedTrunkNet::from_data("transfer", d, TRANSFER_HIDDEN, x, targets, task_rows, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::{graddrop, naive_sum, GradDropConfig};
    use crate::problems::finite_diff_check;

    #[test]
    fn zero_network_is_flat() {
        let net = SharedTrunkNet::from_data(
            "zero",
            3,
            4,
            vec![0.0; 5 * 3],
            vec![0.0; 5 * 2],
            vec![(0..5).collect(), (0..5).collect()],
            false,
        );
        let w = vec![0.0; net.dim()];
        assert_eq!(net.losses(&w), vec![0.0, 0.0]);
        for g in net.task_gradients(&w) {
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let net = mlp_multitask_problem(3, 8, 4);
        let mut rng = RngStream::new(1, 0);
        let w = net.init(&mut rng);
        let err = finite_diff_check(&net, &w, 1e-5);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn single_task_graddrop_is_identity() {
        let net = mlp_multitask_problem(5, 6, 1);
        let w = net.init(&mut RngStream::new(2, 0));
        let eval = net.evaluate(&w);
        let cfg = GradDropConfig::new(1);
        for seed in 0..20 {
            let (out, _) = graddrop(&eval.shared, &cfg, &mut RngStream::new(seed, 0)).unwrap();
            assert_eq!(out, naive_sum(&eval.shared));
        }
    }

    #[test]
    fn transfer_rows_partition_batch() {
        let net = transfer_toy_problem(0);
        let rows = net.task_rows();
        let mut all: Vec<usize> = rows.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..net.rows()).collect::<Vec<_>>());
        assert!(rows[0].iter().all(|r| !rows[1].contains(r)));
    }

    #[test]
    fn transfer_gradients_have_disjoint_rows() {
        let net = transfer_toy_problem(1);
        let w = net.init(&mut RngStream::new(4, 0));
        let eval = net.evaluate(&w);
        assert!(eval.shared.batch_separated());
        let h = net.hidden();
        for (k, g) in eval.shared.grads().iter().enumerate() {
            for r in 0..net.rows() {
                let row = &g.data()[r * h..(r + 1) * h];
                if !net.task_rows()[k].contains(&r) {
                    assert!(row.iter().all(|&x| x == 0.0));
                }
            }
        }
    }
}
