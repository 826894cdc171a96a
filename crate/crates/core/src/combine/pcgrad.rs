use super::TaskGradients;
use crate::error::Result;
use crate::ndcore::{RngStream, Tensor};

/// Squared relative norm below which a projected gradient is treated as zero.
const NEGLIGIBLE_SQ: f64 = 1e-24;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects `g` onto the normal plane of `reference` when the two conflict
/// (negative dot product). Returns `g` unchanged otherwise.
pub fn project_conflicting(g: &[f64], reference: &[f64]) -> Vec<f64> {
    let mut out = g.to_vec();
    project_in_place(&mut out, reference);
    out
}

fn project_in_place(g: &mut [f64], reference: &[f64]) {
    let d = dot(g, reference);
    if d < 0.0 {
        // d < 0 implies |reference| > 0
        let scale = d / dot(reference, reference);
        for (x, r) in g.iter_mut().zip(reference) {
            *x -= scale * r;
        }
    }
}

/// PCGrad over flattened task gradients; returns the sum of the projected gradients.
///
/// Static mode projects against a frozen copy of the inputs. Iterative mode
/// projects against the gradients as they are being rewritten, which keeps
/// the method alive in one dimension where every conflict would otherwise
/// cancel both sides.
pub fn pcgrad(tg: &TaskGradients, rng: &mut RngStream, iterative: bool) -> Result<Tensor> {
    let n = tg.n_tasks();
    let original: Vec<Vec<f64>> = tg.grads().iter().map(|g| g.data().to_vec()).collect();
    let mut projected = original.clone();
    let original_sq: Vec<f64> = original.iter().map(|g| dot(g, g)).collect();
    let mut scratch = vec![0.0; original[0].len()];

    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        rng.shuffle(&mut order);
        for j in order {
            let reference = if iterative { &projected[j] } else { &original[j] };
            // a reference already projected down to rounding noise counts as zero;
            // in one dimension the exact projection is 0, not a tiny signed residual
            if dot(reference, reference) <= NEGLIGIBLE_SQ * original_sq[j] {
                continue;
            }
            scratch.copy_from_slice(reference);
            project_in_place(&mut projected[i], &scratch);
        }
    }

    let mut sum = vec![0.0; original[0].len()];
    for g in &projected {
        for (s, x) in sum.iter_mut().zip(g) {
            *s += x;
        }
    }
    Tensor::new(tg.shape().to_vec(), sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(vs: &[&[f64]]) -> TaskGradients {
        TaskGradients::new(vs.iter().map(|v| Tensor::from_vec(v.to_vec())).collect()).unwrap()
    }

    #[test]
    fn orthogonal_gradients_pass_through() {
        let tg = vecs(&[&[1.0, 0.0], &[0.0, 1.0]]);
        for iterative in [false, true] {
            let out = pcgrad(&tg, &mut RngStream::new(0, 0), iterative).unwrap();
            assert_eq!(out.data(), &[1.0, 1.0]);
        }
    }

    #[test]
    fn static_mode_zeroes_opposed_scalars() {
        let tg = TaskGradients::new(vec![Tensor::scalar(1.0), Tensor::scalar(-1.0)]).unwrap();
        let out = pcgrad(&tg, &mut RngStream::new(0, 0), false).unwrap();
        assert_eq!(out.data(), &[0.0]);
    }

    #[test]
    fn static_mode_hand_projection() {
        // g1' = (0.5, 0.5), g2' = (0, 1)
        let tg = vecs(&[&[1.0, 0.0], &[-1.0, 1.0]]);
        for seed in 0..10 {
            let out = pcgrad(&tg, &mut RngStream::new(seed, 0), false).unwrap();
            assert!((out.data()[0] - 0.5).abs() < 1e-15);
            assert!((out.data()[1] - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn iterative_mode_keeps_last_scalar() {
        // g1 is zeroed against g2; g2 then sees a zero reference and survives
        let tg = TaskGradients::new(vec![Tensor::scalar(1.0), Tensor::scalar(-1.0)]).unwrap();
        let out = pcgrad(&tg, &mut RngStream::new(0, 0), true).unwrap();
        assert_eq!(out.data(), &[-1.0]);
    }

    #[test]
    fn iterative_mode_ignores_rounding_residuals() {
        let v = [0.416, -0.0875, -0.615, 1.578, 0.972];
        let tg = TaskGradients::new(v.iter().map(|&x| Tensor::scalar(x)).collect()).unwrap();
        // g1..g3 are zeroed; g4 and g5 agree in sign and survive
        let out = pcgrad(&tg, &mut RngStream::new(0, 0), true).unwrap();
        assert!((out.data()[0] - (1.578 + 0.972)).abs() < 1e-12, "{:?}", out.data());
    }

    #[test]
    fn projection_is_orthogonal() {
        let g = [1.0, 2.0, -3.0];
        let r = [-0.5, 0.25, 1.0];
        let p = project_conflicting(&g, &r);
        assert!(dot(&p, &r).abs() < 1e-12);
        // no conflict, no change
        assert_eq!(project_conflicting(&g, &[1.0, 1.0, 0.0]), g.to_vec());
        // zero reference never triggers
        assert_eq!(project_conflicting(&g, &[0.0; 3]), g.to_vec());
    }
}
