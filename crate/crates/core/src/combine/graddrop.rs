use serde::{Deserialize, Serialize};

use super::{naive_sum, TaskGradients};
use crate::error::{Error, Result};
use crate::ndcore::{RngStream, Tensor};

/// Knobs of the GradDrop layer.
///
/// The default (`k = 1`, zero leaks, marginalize on) is the standard
/// configuration. `k = 0` gives Random GradDrop, where every sign is kept
/// with probability one half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradDropConfig {
    /// Slope of the clipped-linear activation applied to the sign purity.
    pub k: f64,
    /// Per-task leak; `1.0` lets that task's gradient through untouched.
    pub leaks: Vec<f64>,
    /// Sum the sign-corrected gradients over the batch axis before computing purity.
    pub marginalize: bool,
    /// Rescale the output to the L2 norm of the plain gradient sum.
    pub renormalize: bool,
}

impl GradDropConfig {
    pub fn new(n_tasks: usize) -> Self {
        Self {
            k: 1.0,
            leaks: vec![0.0; n_tasks],
            marginalize: true,
            renormalize: false,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_leaks(mut self, leaks: Vec<f64>) -> Self {
        self.leaks = leaks;
        self
    }

    pub fn with_marginalize(mut self, on: bool) -> Self {
        self.marginalize = on;
        self
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn validate(&self, n_tasks: usize) -> Result<()> {
        if !(self.k >= 0.0) {
            return Err(Error::Config(format!("activation slope k must be >= 0, got {}", self.k)));
        }
        if self.leaks.len() != n_tasks {
            return Err(Error::Config(format!(
                "expected {} leak parameters, got {}",
                n_tasks,
                self.leaks.len()
            )));
        }
        if let Some(l) = self.leaks.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("leak {l} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Masks drawn by one GradDrop call.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    /// One `{0, 1}` mask per task, on the (possibly marginalized) purity shape.
    pub masks: Vec<Tensor>,
    /// Gradient positive sign purity.
    pub purity: Tensor,
    /// Kept entries over nonzero task-gradient entries; 1 when there are none.
    pub keep_fraction: f64,
}

/// Gradient positive sign purity `P = (1 + sum G / sum |G|) / 2`.
///
/// Positions where every gradient is zero get `P = 0.5`.
pub fn purity(grads: &[Tensor]) -> Result<Tensor> {
    let first = grads
        .first()
        .ok_or_else(|| Error::Contract("purity needs at least one gradient".into()))?;
    let mut total = Tensor::zeros(first.shape());
    let mut total_abs = Tensor::zeros(first.shape());
    for g in grads {
        total.add_assign(g)?;
        total_abs.add_assign(&g.abs())?;
    }
    total.zip_tiled(&total_abs, |s, a| {
        if a == 0.0 {
            0.5
        } else {
            (0.5 * (1.0 + s / a)).clamp(0.0, 1.0)
        }
    })
}

/// Clipped-linear activation `clip(k (P - 0.5) + 0.5, 0, 1)`.
pub fn activation(purity: &Tensor, k: f64) -> Result<Tensor> {
    if !(k >= 0.0) {
        return Err(Error::Config(format!("activation slope k must be >= 0, got {k}")));
    }
    Ok(purity.map(|p| (k * (p - 0.5) + 0.5).clamp(0.0, 1.0)))
}

/// Draws one shared `U ~ U[0,1)` per position and forms the coupled masks
/// `M_i = 1[f(P) > U] 1[G_i > 0] + 1[f(P) < U] 1[G_i < 0]`.
///
/// Returns the masks and the keep fraction.
pub fn sample_masks(
    grads: &[Tensor],
    activated: &Tensor,
    rng: &mut RngStream,
) -> Result<(Vec<Tensor>, f64)> {
    if let Some(g) = grads.iter().find(|g| g.shape() != activated.shape()) {
        return Err(Error::Shape(format!(
            "gradient {:?} does not match activated purity {:?}",
            g.shape(),
            activated.shape()
        )));
    }
    let u = rng.uniform(activated.shape());
    let mut kept = 0usize;
    let mut nonzero = 0usize;
    let masks = grads
        .iter()
        .map(|g| {
            let data = g
                .data()
                .iter()
                .zip(activated.data())
                .zip(u.data())
                .map(|((&gi, &fp), &ui)| {
                    if gi != 0.0 {
                        nonzero += 1;
                    }
                    let keep = (fp > ui && gi > 0.0) || (fp < ui && gi < 0.0);
                    if keep {
                        kept += 1;
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Tensor::new(g.shape().to_vec(), data).expect("shape preserved")
        })
        .collect();
    let keep_fraction = if nonzero == 0 {
        1.0
    } else {
        kept as f64 / nonzero as f64
    };
    Ok((masks, keep_fraction))
}

/// Sign-corrected batch sum `sum_batch sign(A) * grad`.
pub fn batch_marginalize(activations: &Tensor, grad: &Tensor) -> Result<Tensor> {
    if activations.shape() != grad.shape() {
        return Err(Error::Shape(format!(
            "activations {:?} vs gradient {:?}",
            activations.shape(),
            grad.shape()
        )));
    }
    activations.sign().mul(grad)?.sum_leading_axis()
}

/// One GradDrop pass over `tg`. Returns the combined gradient (same shape as
/// the inputs) and the masks that produced it.
pub fn graddrop(
    tg: &TaskGradients,
    cfg: &GradDropConfig,
    rng: &mut RngStream,
) -> Result<(Tensor, MaskSet)> {
    cfg.validate(tg.n_tasks())?;
    if tg.batch_separated() && tg.activations().is_none() {
        return Err(Error::Contract(
            "batch-separated gradients require the activations they were taken at".into(),
        ));
    }

    let sign_a = tg.activations().map(Tensor::sign);
    let marginalize = tg.batch_separated() || (cfg.marginalize && !tg.shape().is_empty());
    let mut signal = Vec::with_capacity(tg.n_tasks());
    for g in tg.grads() {
        let corrected = match &sign_a {
            Some(s) => s.mul(g)?,
            None => g.clone(),
        };
        signal.push(if marginalize {
            corrected.sum_leading_axis()?
        } else {
            corrected
        });
    }

    let p = purity(&signal)?;
    let fp = activation(&p, cfg.k)?;
    let (masks, keep_fraction) = sample_masks(&signal, &fp, rng)?;

    let mut out = Tensor::zeros(tg.shape());
    for ((g, m), &leak) in tg.grads().iter().zip(&masks).zip(&cfg.leaks) {
        let coef = m.map(|mi| leak + (1.0 - leak) * mi);
        out.add_assign(&g.mul(&coef)?)?;
    }

    if cfg.renormalize {
        let target = naive_sum(tg).l2_norm();
        let current = out.l2_norm();
        if target > 0.0 && current > 0.0 {
            out = out.scale(target / current);
        }
    }

    Ok((
        out,
        MaskSet {
            masks,
            purity: p,
            keep_fraction,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(values: &[f64]) -> Vec<Tensor> {
        values.iter().map(|&v| Tensor::scalar(v)).collect()
    }

    fn scalar_tg(values: &[f64]) -> TaskGradients {
        TaskGradients::new(scalars(values)).unwrap()
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&scalars(&[3.0, 1.0])).unwrap().data(), &[1.0]);
        let p = purity(&scalars(&[7.0, -3.0])).unwrap().data()[0];
        assert!((p - 0.7).abs() < 1e-15);
        assert_eq!(purity(&scalars(&[0.0, 0.0])).unwrap().data(), &[0.5]);
        assert_eq!(purity(&scalars(&[-1.0, -4.0])).unwrap().data(), &[0.0]);
    }

    #[test]
    fn purity_rejects_mismatched_shapes() {
        let err = purity(&[Tensor::zeros(&[2]), Tensor::zeros(&[3])]);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn activation_examples() {
        let p = Tensor::from_vec(vec![0.7]);
        assert!((activation(&p, 1.0).unwrap().data()[0] - 0.7).abs() < 1e-15);
        let any = Tensor::from_vec(vec![0.0, 0.3, 1.0]);
        assert_eq!(activation(&any, 0.0).unwrap().data(), &[0.5, 0.5, 0.5]);
        assert_eq!(activation(&Tensor::from_vec(vec![0.9]), 4.0).unwrap().data(), &[1.0]);
        assert!(matches!(activation(&p, -0.1), Err(Error::Config(_))));
    }

    #[test]
    fn activation_is_odd_and_monotone() {
        let ps: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for k in [0.0, 0.5, 1.0, 3.0] {
            let f = activation(&Tensor::from_vec(ps.clone()), k).unwrap();
            let mirrored = activation(&Tensor::from_vec(ps.iter().map(|p| 1.0 - p).collect()), k).unwrap();
            for (a, b) in f.data().iter().zip(mirrored.data()) {
                assert!((a + b - 1.0).abs() < 1e-12);
            }
            assert!(f.data().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn forced_masks() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let (m, keep) = sample_masks(&scalars(&[3.0, 1.0]), &Tensor::scalar(1.0), &mut rng).unwrap();
            assert_eq!((m[0].data()[0], m[1].data()[0]), (1.0, 1.0));
            assert_eq!(keep, 1.0);
            let (m, _) = sample_masks(&scalars(&[-2.0, -5.0]), &Tensor::scalar(0.0), &mut rng).unwrap();
            // U = 0 exactly would tie; with 53-bit draws it does not occur here
            assert_eq!((m[0].data()[0], m[1].data()[0]), (1.0, 1.0));
        }
    }

    #[test]
    fn mixed_masks_follow_activation() {
        let mut rng = RngStream::new(2, 0);
        let trials = 100_000;
        let mut positive = 0;
        for _ in 0..trials {
            let (m, keep) = sample_masks(&scalars(&[7.0, -3.0]), &Tensor::scalar(0.7), &mut rng).unwrap();
            let pair = (m[0].data()[0], m[1].data()[0]);
            assert!(pair == (1.0, 0.0) || pair == (0.0, 1.0));
            assert_eq!(keep, 0.5);
            if pair == (1.0, 0.0) {
                positive += 1;
            }
        }
        let frac = positive as f64 / trials as f64;
        // sd = sqrt(0.21 / 1e5) ~ 0.00145
        assert!((frac - 0.7).abs() < 0.006, "{frac}");
    }

    #[test]
    fn zero_entries_get_mask_zero() {
        let mut rng = RngStream::new(3, 0);
        let (m, keep) = sample_masks(&scalars(&[0.0, 2.0]), &Tensor::scalar(1.0), &mut rng).unwrap();
        assert_eq!(m[0].data()[0], 0.0);
        assert_eq!(keep, 1.0);
        let (_, keep) = sample_masks(&scalars(&[0.0, 0.0]), &Tensor::scalar(0.5), &mut rng).unwrap();
        assert_eq!(keep, 1.0);
    }

    #[test]
    fn marginalize_examples() {
        let a = Tensor::new(vec![2, 1], vec![2.0, -1.0]).unwrap();
        let g = Tensor::new(vec![2, 1], vec![0.5, 0.3]).unwrap();
        let out = batch_marginalize(&a, &g).unwrap();
        assert_eq!(out.shape(), &[1]);
        assert!((out.data()[0] - 0.2).abs() < 1e-15);

        let a = Tensor::new(vec![1, 3], vec![1.0, 2.0, 0.1]).unwrap();
        let g = Tensor::new(vec![1, 3], vec![-1.0, 4.0, 0.5]).unwrap();
        assert_eq!(batch_marginalize(&a, &g).unwrap().data(), &[-1.0, 4.0, 0.5]);

        let a = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let g = Tensor::new(vec![2, 1], vec![0.37, -0.37]).unwrap();
        assert_eq!(batch_marginalize(&a, &g).unwrap().data(), &[0.0]);

        assert!(batch_marginalize(&Tensor::scalar(1.0), &Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn graddrop_all_positive_is_deterministic() {
        let cfg = GradDropConfig::new(2);
        for seed in 0..200 {
            let (out, _) = graddrop(&scalar_tg(&[3.0, 1.0]), &cfg, &mut RngStream::new(seed, 0)).unwrap();
            assert_eq!(out.data(), &[4.0]);
        }
    }

    #[test]
    fn graddrop_mixed_matches_enumeration() {
        // outcomes: 7 with prob 0.7, -3 with prob 0.3; expectation 4
        let cfg = GradDropConfig::new(2);
        let draws = 50_000;
        let mut sum = 0.0;
        let mut sevens = 0;
        for seed in 0..draws {
            let (out, _) = graddrop(&scalar_tg(&[7.0, -3.0]), &cfg, &mut RngStream::new(seed, 0)).unwrap();
            let v = out.data()[0];
            assert!(v == 7.0 || v == -3.0);
            if v == 7.0 {
                sevens += 1;
            }
            sum += v;
        }
        let mean = sum / draws as f64;
        // sd of one draw = 10 * sqrt(0.21) ~ 4.58
        assert!((mean - 4.0).abs() < 4.0 * 4.58 / (draws as f64).sqrt(), "{mean}");
        assert!((sevens as f64 / draws as f64 - 0.7).abs() < 0.01);
    }

    #[test]
    fn full_leak_is_naive_sum() {
        let cfg = GradDropConfig::new(3).with_leaks(vec![1.0; 3]);
        let tg = TaskGradients::new(vec![
            Tensor::from_vec(vec![1.0, -2.0]),
            Tensor::from_vec(vec![-0.5, 3.0]),
            Tensor::from_vec(vec![0.25, 0.0]),
        ])
        .unwrap();
        let (out, _) = graddrop(&tg, &cfg, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out, naive_sum(&tg));
    }

    #[test]
    fn renormalize_matches_naive_norm() {
        let cfg = GradDropConfig::new(2).with_renormalize(true).with_marginalize(false);
        let tg = TaskGradients::new(vec![
            Tensor::from_vec(vec![1.0, -2.0, 0.5]),
            Tensor::from_vec(vec![-3.0, 1.0, 0.5]),
        ])
        .unwrap();
        let (out, _) = graddrop(&tg, &cfg, &mut RngStream::new(5, 0)).unwrap();
        let target = naive_sum(&tg).l2_norm();
        assert!((out.l2_norm() - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn zero_gradients_stay_zero() {
        let cfg = GradDropConfig::new(2).with_renormalize(true);
        for seed in 0..100 {
            let (out, _) = graddrop(&scalar_tg(&[0.0, 0.0]), &cfg, &mut RngStream::new(seed, 0)).unwrap();
            assert_eq!(out.data(), &[0.0]);
        }
    }

    #[test]
    fn config_errors() {
        let tg = scalar_tg(&[1.0, 2.0]);
        let mut rng = RngStream::new(0, 0);
        let short = GradDropConfig::new(1);
        assert!(matches!(graddrop(&tg, &short, &mut rng), Err(Error::Config(_))));
        let bad_leak = GradDropConfig::new(2).with_leaks(vec![0.0, 1.5]);
        assert!(matches!(graddrop(&tg, &bad_leak, &mut rng), Err(Error::Config(_))));
        let bad_k = GradDropConfig::new(2).with_k(-1.0);
        assert!(matches!(graddrop(&tg, &bad_k, &mut rng), Err(Error::Config(_))));

        let sep = TaskGradients::batch_separated_unchecked(vec![
            Tensor::zeros(&[2, 2]),
            Tensor::zeros(&[2, 2]),
        ])
        .unwrap();
        assert!(matches!(
            graddrop(&sep, &GradDropConfig::new(2), &mut rng),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn masks_tile_over_batch() {
        // two rows, one feature; marginalized signal is [+1] for task 0 and [-3] for task 1
        let a = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let g0 = Tensor::new(vec![2, 1], vec![2.0, -1.0]).unwrap();
        let g1 = Tensor::new(vec![2, 1], vec![-1.0, -2.0]).unwrap();
        let tg = TaskGradients::with_activations(vec![g0.clone(), g1.clone()], a, false).unwrap();
        let cfg = GradDropConfig::new(2);
        for seed in 0..50 {
            let (out, masks) = graddrop(&tg, &cfg, &mut RngStream::new(seed, 0)).unwrap();
            assert_eq!(masks.purity.shape(), &[1]);
            let expected = if masks.masks[0].data()[0] == 1.0 { &g0 } else { &g1 };
            assert_eq!(&out, expected);
        }
    }
}
