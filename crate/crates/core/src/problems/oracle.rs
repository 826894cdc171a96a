use super::Problem;
use crate::error::{Error, Result};

/// Absolute floor under the relative-error denominator.
const FD_FLOOR: f64 = 1e-8;

/// Largest per-task relative error `|g - fd|_2 / |fd|_2` between analytic
/// gradients and central differences `(L(w + h e_j) - L(w - h e_j)) / 2h`.
///
/// The error is taken over each task's whole gradient vector: per-coordinate
/// ratios are dominated by rounding (about `eps * L / h`) wherever a single
/// coordinate is near zero.
pub fn finite_diff_check(p: &dyn Problem, w: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    finite_diff_against(p, w, h, &p.task_gradients(w))
}

/// Same as [`finite_diff_check`] but against caller-supplied gradients.
pub fn finite_diff_against(p: &dyn Problem, w: &[f64], h: f64, analytic: &[Vec<f64>]) -> f64 {
    let n = analytic.len();
    let mut diff_sq = vec![0.0; n];
    let mut fd_sq = vec![0.0; n];
    let mut probe = w.to_vec();
    for j in 0..w.len() {
        probe[j] = w[j] + h;
        let up = p.losses(&probe);
        probe[j] = w[j] - h;
        let down = p.losses(&probe);
        probe[j] = w[j];
        for (t, grad) in analytic.iter().enumerate() {
            let fd = (up[t] - down[t]) / (2.0 * h);
            diff_sq[t] += (grad[j] - fd).powi(2);
            fd_sq[t] += fd * fd;
        }
    }
    diff_sq
        .iter()
        .zip(&fd_sq)
        .map(|(d, f)| d.sqrt() / f.sqrt().max(FD_FLOOR))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMinimum {
    pub x: f64,
    pub loss: f64,
}

/// Global minimum of the summed loss of a one-weight problem on `[lo, hi]`:
/// dense grid scan, then golden-section refinement inside the winning cell.
pub fn grid_search_min(p: &dyn Problem, lo: f64, hi: f64, step: f64) -> Result<GridMinimum> {
    if p.dim() != 1 {
        return Err(Error::Precondition(format!(
            "grid search needs a one-weight problem, {} has {}",
            p.name(),
            p.dim()
        )));
    }
    if !(lo < hi) || !(step > 0.0) {
        return Err(Error::Precondition(format!(
            "invalid grid [{lo}, {hi}] with step {step}"
        )));
    }
    let f = |x: f64| p.total_loss(&[x]);
    let count = ((hi - lo) / step).floor() as usize;
    let (mut best_x, mut best) = (lo, f(lo));
    for i in 1..=count {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best {
            best = v;
            best_x = x;
        }
    }

    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    Ok(if v <= best {
        GridMinimum { x, loss: v }
    } else {
        GridMinimum { x: best_x, loss: best }
    })
}
