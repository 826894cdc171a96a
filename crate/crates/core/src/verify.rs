//! Numerical checks of GradDrop's statistical properties.
//!
//! Everything here works under the linear loss-change model with unit
//! learning rate: an update `u` applied to a scalar weight whose total
//! gradient is `S` changes the loss by `dL = -S u`. Plain SGD gives
//! `-S^2`; GradDrop gives a two-outcome random variable because one shared
//! uniform draw decides whether the positive or the negative gradients are
//! kept.
//!
//! Monte Carlo reports carry standard errors, and every comparison against
//! a reference is phrased in multiples of them.

use crate::combine::{activation, graddrop, GradDropConfig, TaskGradients};
use crate::error::{Error, Result};
use crate::ndcore::{RngStream, Tensor};
use crate::problems::Problem;

/// Fewest samples any Monte Carlo estimate here may use.
pub const MIN_SAMPLES: usize = 10_000;

const CHUNK: usize = 1 << 16;

/// Empirical mean and variance of `dL` against reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct StatReport {
    pub k: f64,
    pub samples: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub expected_mean: f64,
    pub expected_var: f64,
    pub z_mean: f64,
    pub z_var: f64,
}

impl StatReport {
    /// `|var - expected_var| / expected_var`, zero when both vanish.
    pub fn rel_var_error(&self) -> f64 {
        let diff = (self.var - self.expected_var).abs();
        if self.expected_var == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.expected_var
        }
    }

    pub fn mean_within(&self, sigmas: f64) -> bool {
        self.z_mean.abs() <= sigmas
    }
}

fn split_masses(grads: &[f64]) -> (f64, f64) {
    let p = grads.iter().filter(|g| **g >= 0.0).map(|g| g.abs()).sum();
    let n = grads.iter().filter(|g| **g < 0.0).map(|g| g.abs()).sum();
    (p, n)
}

/// Closed-form mean and variance of `dL` for positive mass `p`, negative
/// mass `n` and activation slope `k` in `[0, 1]`:
/// `E = -(k+1)(p-n)^2 / 2` and
/// `Var = (p-n)^2 ((p-n)^2 (-k^2 - 1) + 2p^2 + 2n^2) / 4`.
pub fn closed_form_stats(p: f64, n: f64, k: f64) -> Result<(f64, f64)> {
    if !(p >= 0.0 && n >= 0.0) || !(p + n > 0.0) {
        return Err(Error::Domain(format!(
            "closed form needs p, n >= 0 with p + n > 0, got p = {p}, n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!("closed form holds for k in [0, 1], got {k}")));
    }
    let d2 = (p - n).powi(2);
    let mean = -0.5 * (k + 1.0) * d2;
    let var = 0.25 * d2 * (d2 * (-k * k - 1.0) + 2.0 * p * p + 2.0 * n * n);
    Ok((mean, var))
}

/// Brute-force mean and variance of `dL` by enumerating the two outcomes of
/// the shared uniform draw. Valid for every clipped-linear slope `k >= 0`.
pub fn enumerate_stats(grads: &[f64], k: f64) -> (f64, f64) {
    let total: f64 = grads.iter().sum();
    let abs_total: f64 = grads.iter().map(|g| g.abs()).sum();
    if abs_total == 0.0 {
        return (0.0, 0.0);
    }
    let purity = 0.5 * (1.0 + total / abs_total);
    let keep_positive = (k * (purity - 0.5) + 0.5).clamp(0.0, 1.0);
    let positives: f64 = grads.iter().filter(|g| **g > 0.0).sum();
    let negatives: f64 = grads.iter().filter(|g| **g < 0.0).sum();
    let outcomes = [
        (keep_positive, -total * positives),
        (1.0 - keep_positive, -total * negatives),
    ];
    let mean: f64 = outcomes.iter().map(|(w, v)| w * v).sum();
    let var: f64 = outcomes.iter().map(|(w, v)| w * (v - mean).powi(2)).sum();
    (mean, var)
}

fn reference_stats(grads: &[f64], k: f64) -> (f64, f64) {
    let (p, n) = split_masses(grads);
    if p + n == 0.0 {
        return (0.0, 0.0);
    }
    if k <= 1.0 {
        closed_form_stats(p, n, k).expect("masses are valid")
    } else {
        enumerate_stats(grads, k)
    }
}

// Summing around the first value keeps constant samples exact; a plain
// sum of 10^6 equal values drifts by ~1e-12 relative.
fn shifted_mean(values: &[f64]) -> f64 {
    let shift = values[0];
    shift + values.iter().map(|v| v - shift).sum::<f64>() / values.len() as f64
}

fn z_score(diff: f64, se: f64, scale: f64) -> f64 {
    // degenerate (deterministic) cases have se = 0; rounding-level
    // differences then map to small finite z
    let floor = 1e-12 * scale.abs().max(1.0);
    diff / se.max(floor)
}

/// Monte Carlo estimate of `dL` under GradDrop with slope `k` on a set of
/// scalar task gradients, compared with the closed form (`k <= 1`) or the
/// enumeration oracle (`k > 1`, where clipping applies).
///
/// Samples are drawn through [`graddrop`] itself, one batch of independent
/// scalar positions at a time.
pub fn mc_delta_loss(grads: &[f64], k: f64, samples: usize, rng: &mut RngStream) -> Result<StatReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    if grads.is_empty() {
        return Err(Error::Precondition("need at least one gradient".into()));
    }
    let total: f64 = grads.iter().sum();
    let cfg = GradDropConfig::new(grads.len())
        .with_k(k)
        .with_marginalize(false)
        .with_renormalize(false);

    let mut values = Vec::with_capacity(samples);
    let mut remaining = samples;
    while remaining > 0 {
        let m = remaining.min(CHUNK);
        let tg = TaskGradients::new(grads.iter().map(|&g| Tensor::full(&[m], g)).collect())?;
        let (out, _) = graddrop(&tg, &cfg, rng)?;
        values.extend(out.data().iter().map(|u| -total * u));
        remaining -= m;
    }

    let n = samples as f64;
    let mean = shifted_mean(&values);
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in &values {
        let d2 = (v - mean).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    let var = m2 * n / (n - 1.0);
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - m2 * m2).max(0.0) / n).sqrt();

    let (expected_mean, expected_var) = reference_stats(grads, k);
    Ok(StatReport {
        k,
        samples,
        mean,
        var,
        se_mean,
        se_var,
        expected_mean,
        expected_var,
        z_mean: z_score(mean - expected_mean, se_mean, expected_mean),
        z_var: z_score(var - expected_var, se_var, expected_var),
    })
}

/// Stats along an ascending grid of slopes.
#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    pub rows: Vec<StatReport>,
    /// Reference `|E|` nondecreasing and `Var` nonincreasing along the grid.
    pub closed_form_monotone: bool,
    /// Empirical estimates never contradict that ordering by more than 3 sigma.
    pub monte_carlo_consistent: bool,
}

fn monotone_within(values: &[(f64, f64)], increasing: bool, sigmas: f64) -> bool {
    values.windows(2).all(|w| {
        let (a, sa) = w[0];
        let (b, sb) = w[1];
        let band = sigmas * (sa * sa + sb * sb).sqrt();
        let slack = 1e-12 * a.abs().max(b.abs()).max(1.0);
        if increasing {
            b >= a - band - slack
        } else {
            b <= a + band + slack
        }
    })
}

pub fn monotonicity_sweep(
    grads: &[f64],
    k_grid: &[f64],
    samples: usize,
    rng: &mut RngStream,
) -> Result<MonotonicityReport> {
    if k_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("k grid must be sorted ascending".into()));
    }
    if k_grid.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(Error::Precondition("k grid must lie in [0, 1]".into()));
    }
    let rows = k_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| mc_delta_loss(grads, k, samples, &mut rng.fork(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let exact_mean: Vec<(f64, f64)> = rows.iter().map(|r| (r.expected_mean.abs(), 0.0)).collect();
    let exact_var: Vec<(f64, f64)> = rows.iter().map(|r| (r.expected_var, 0.0)).collect();
    let mc_mean: Vec<(f64, f64)> = rows.iter().map(|r| (r.mean.abs(), r.se_mean)).collect();
    let mc_var: Vec<(f64, f64)> = rows.iter().map(|r| (r.var, r.se_var)).collect();

    Ok(MonotonicityReport {
        closed_form_monotone: monotone_within(&exact_mean, true, 0.0)
            && monotone_within(&exact_var, false, 0.0),
        monte_carlo_consistent: monotone_within(&mc_mean, true, 3.0)
            && monotone_within(&mc_var, false, 3.0),
        rows,
    })
}

/// Comparison of a steeper activation (`k_steep`) with a flatter one.
#[derive(Clone, Debug)]
pub struct SteeperReport {
    pub steep: StatReport,
    pub flat: StatReport,
    /// `E_steep <= E_flat <= 0` and `Var_steep <= Var_flat` on the enumeration oracle.
    pub oracle_holds: bool,
    /// The same orderings on the Monte Carlo estimates, within 3 sigma.
    pub monte_carlo_holds: bool,
}

pub fn steeper_compare(
    k_steep: f64,
    k_flat: f64,
    grads: &[f64],
    samples: usize,
    rng: &mut RngStream,
) -> Result<SteeperReport> {
    if !(k_steep >= k_flat && k_flat >= 0.0) {
        return Err(Error::Precondition(format!(
            "need k_steep >= k_flat >= 0, got {k_steep} and {k_flat}"
        )));
    }
    let steep = mc_delta_loss(grads, k_steep, samples, &mut rng.fork(0))?;
    let flat = mc_delta_loss(grads, k_flat, samples, &mut rng.fork(1))?;

    let (es, vs) = enumerate_stats(grads, k_steep);
    let (ef, vf) = enumerate_stats(grads, k_flat);
    let slack = 1e-12 * es.abs().max(vs).max(1.0);
    let oracle_holds = es <= ef + slack && ef <= slack && vs <= vf + slack;

    let mean_band = 3.0 * (steep.se_mean.powi(2) + flat.se_mean.powi(2)).sqrt();
    let var_band = 3.0 * (steep.se_var.powi(2) + flat.se_var.powi(2)).sqrt();
    let monte_carlo_holds = steep.mean <= flat.mean + mean_band + slack
        && flat.mean <= 3.0 * flat.se_mean + slack
        && steep.var <= flat.var + var_band + slack;

    Ok(SteeperReport {
        steep,
        flat,
        oracle_holds,
        monte_carlo_holds,
    })
}

/// True iff every per-task gradient at `w` has L2 norm below `eps`.
pub fn check_joint_minimum(p: &dyn Problem, w: &[f64], eps: f64) -> bool {
    assert!(eps > 0.0, "eps must be positive");
    p.task_gradients(w)
        .iter()
        .all(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt() < eps)
}

/// Distribution of GradDrop updates over many independent seeds at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeReport {
    pub draws: usize,
    /// Draws whose weight update had any nonzero entry.
    pub nonzero: usize,
    /// Draws whose first update coordinate was positive.
    pub positive: usize,
}

impl EscapeReport {
    pub fn positive_fraction(&self) -> f64 {
        self.positive as f64 / self.draws as f64
    }
}

/// Applies GradDrop at `w` once per seed in `0..seeds`, each with a fresh stream.
pub fn graddrop_escape(p: &dyn Problem, w: &[f64], cfg: &GradDropConfig, seeds: u64) -> Result<EscapeReport> {
    let eval = p.evaluate(w);
    let mut report = EscapeReport {
        draws: seeds as usize,
        nonzero: 0,
        positive: 0,
    };
    for seed in 0..seeds {
        let (combined, _) = graddrop(&eval.shared, cfg, &mut RngStream::new(seed, 0))?;
        let update = p.weight_gradient(w, &eval, &combined);
        if update.iter().any(|&u| u != 0.0) {
            report.nonzero += 1;
        }
        if update.first().is_some_and(|&u| u > 0.0) {
            report.positive += 1;
        }
    }
    Ok(report)
}

/// Expected GradDrop update norm at increasing distance from a component minimum.
#[derive(Clone, Debug)]
pub struct Prop2Report {
    /// `(radius, mean norm, standard error)`.
    pub rows: Vec<(f64, f64, f64)>,
    /// No decrease beyond 3 sigma between consecutive radii.
    pub nondecreasing: bool,
    /// Every consecutive increase exceeds 3 sigma of the difference.
    pub strictly_increasing: bool,
}

/// Estimates `E[|update|_2]` under GradDrop at `w_star + d * direction` for
/// each radius `d`. `w_star` must be a minimum of at least one task loss.
pub fn check_prop2(
    p: &dyn Problem,
    w_star: &[f64],
    direction: &[f64],
    radii: &[f64],
    cfg: &GradDropConfig,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Prop2Report> {
    let at_minimum = p
        .task_gradients(w_star)
        .iter()
        .any(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
    if !at_minimum {
        return Err(Error::Precondition(
            "w_star is not a minimum of any component loss".into(),
        ));
    }
    if radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("radii must be sorted ascending".into()));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(len > 0.0) || direction.len() != w_star.len() {
        return Err(Error::Precondition("direction must be a nonzero weight-space vector".into()));
    }

    let mut rows = Vec::with_capacity(radii.len());
    for &d in radii {
        let w: Vec<f64> = w_star.iter().zip(direction).map(|(a, b)| a + d * b / len).collect();
        let eval = p.evaluate(&w);
        let norms = (0..samples)
            .map(|_| {
                let (combined, _) = graddrop(&eval.shared, cfg, rng)?;
                let update = p.weight_gradient(&w, &eval, &combined);
                Ok(update.iter().map(|x| x * x).sum::<f64>().sqrt())
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = samples as f64;
        let mean = shifted_mean(&norms);
        let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push((d, mean, (var / n).sqrt()));
    }

    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let strictly_increasing = rows.windows(2).all(|w| {
        let band = 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        w[1].1 - w[0].1 > band
    });
    Ok(Prop2Report {
        nondecreasing: monotone_within(&pairs, true, 3.0),
        strictly_increasing,
        rows,
    })
}

/// `f(P)` for a scalar gradient set, exposed for reporting.
pub fn keep_positive_probability(grads: &[f64], k: f64) -> Result<f64> {
    let ts: Vec<Tensor> = grads.iter().map(|&g| Tensor::scalar(g)).collect();
    let p = crate::combine::purity(&ts)?;
    Ok(activation(&p, k)?.data()[0])
}

/// Random scalar gradient set: 2 to 5 tasks with values uniform in `[-2, 2]`.
pub fn random_gradient_set(rng: &mut RngStream) -> Vec<f64> {
    let n = 2 + (rng.next_u64() % 4) as usize;
    (0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect()
}

/// Named groups of checks, one per statistical claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// GradDrop escapes points that are minima of the sum but not of every task.
    Prop1,
    /// Expected update norm grows away from a single-task minimum.
    Prop2,
    /// Mean and variance of the loss change, SGD equivalence and monotonicity in `k`.
    Prop3,
    /// Steeper activations, including clipped `k > 1`, give larger and more certain decreases.
    Corollary,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Prop1, Suite::Prop2, Suite::Prop3, Suite::Corollary];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Prop1 => "prop1",
            Suite::Prop2 => "prop2",
            Suite::Prop3 => "prop3",
            Suite::Corollary => "corollary",
        }
    }
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    /// Monte Carlo samples per estimate.
    pub samples: usize,
    pub seed: u64,
    /// Random gradient sets drawn for the set-based checks.
    pub sets: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            samples: 1_000_000,
            seed: 0,
            sets: 50,
        }
    }
}

pub const K_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Slope pairs `(steep, flat)` compared by the corollary suite.
pub const STEEPER_PAIRS: [(f64, f64); 5] = [(1.0, 0.5), (0.75, 0.25), (2.0, 1.0), (4.0, 0.5), (3.0, 2.0)];

fn stats_ok(r: &StatReport) -> bool {
    let var_ok = if r.expected_var == 0.0 {
        r.var <= 1e-12 * r.expected_mean.abs().max(1.0)
    } else {
        r.rel_var_error() <= 0.02
    };
    r.mean_within(3.0) && var_ok
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let root = RngStream::new(cfg.seed, 0);
    match suite {
        Suite::Prop1 => {
            let gd = GradDropConfig::new(2);
            let seeds = 10_000;
            let split = graddrop_escape(&crate::problems::quad_pair_problem(1.0), &[0.0], &gd, seeds)?;
            let rest = graddrop_escape(&crate::problems::quad_pair_problem(0.0), &[0.0], &gd, seeds)?;
            Ok(vec![
                Check::new(
                    "escape_from_non_joint_minimum",
                    split.nonzero == split.draws && (split.positive_fraction() - 0.5).abs() <= 0.02,
                    format!(
                        "{}/{} nonzero, {:.4} positive",
                        split.nonzero,
                        split.draws,
                        split.positive_fraction()
                    ),
                ),
                Check::new(
                    "rest_at_joint_minimum",
                    rest.nonzero == 0,
                    format!("{}/{} nonzero", rest.nonzero, rest.draws),
                ),
            ])
        }
        Suite::Prop2 => {
            let p = crate::problems::quad_pair_problem(1.0);
            let radii = [0.01, 0.05, 0.1];
            let rep = check_prop2(&p, &[1.0], &[1.0], &radii, &GradDropConfig::new(2), cfg.samples, &mut root.fork(2))?;
            let detail = rep
                .rows
                .iter()
                .map(|(d, m, se)| format!("d={d}: {m:.6} +- {se:.1e}"))
                .collect::<Vec<_>>()
                .join(", ");
            Ok(vec![Check::new("norm_grows_away_from_task_minimum", rep.strictly_increasing, detail)])
        }
        Suite::Prop3 => {
            let mut sets_rng = root.fork(3);
            let mut stat_fail = 0;
            let mut sgd_fail = 0;
            let mut mono_fail = 0;
            let (mut worst_z, mut worst_rel) = (0.0f64, 0.0f64);
            for i in 0..cfg.sets {
                let grads = random_gradient_set(&mut sets_rng);
                let rep = monotonicity_sweep(&grads, &K_GRID, cfg.samples, &mut root.fork(1000 + i as u64))?;
                for r in &rep.rows {
                    worst_z = worst_z.max(r.z_mean.abs());
                    if r.expected_var > 0.0 {
                        worst_rel = worst_rel.max(r.rel_var_error());
                    }
                    if !stats_ok(r) {
                        stat_fail += 1;
                    }
                }
                let at_one = rep.rows.last().expect("grid is nonempty");
                let sgd = -grads.iter().sum::<f64>().powi(2);
                if z_score(at_one.mean - sgd, at_one.se_mean, sgd).abs() >= 3.0 {
                    sgd_fail += 1;
                }
                if !(rep.closed_form_monotone && rep.monte_carlo_consistent) {
                    mono_fail += 1;
                }
            }
            let (e, v) = enumerate_stats(&[7.0, -3.0], 1.0);
            let fixed = mc_delta_loss(&[7.0, -3.0], 1.0, cfg.samples, &mut root.fork(7))?;
            let fixed_ok = (e + 16.0).abs() < 1e-9 && (v - 336.0).abs() < 1e-9 && stats_ok(&fixed);
            let cases = cfg.sets * K_GRID.len();
            Ok(vec![
                Check::new(
                    "closed_form_statistics",
                    stat_fail == 0,
                    format!(
                        "{stat_fail}/{cases} cases outside tolerance, max |z| {worst_z:.2}, max rel var err {worst_rel:.4}"
                    ),
                ),
                Check::new(
                    "sgd_equivalence_at_k1",
                    sgd_fail == 0 && fixed_ok,
                    format!(
                        "{sgd_fail}/{} sets off, {{7,-3}}: E {e} Var {v}, mc {:.3} / {:.2}",
                        cfg.sets, fixed.mean, fixed.var
                    ),
                ),
                Check::new(
                    "monotone_in_k",
                    mono_fail == 0,
                    format!("{mono_fail}/{} sets violate ordering", cfg.sets),
                ),
            ])
        }
        Suite::Corollary => {
            let mut sets_rng = root.fork(4);
            let (mut oracle_fail, mut mc_fail, mut total) = (0, 0, 0);
            for i in 0..cfg.sets {
                let grads = random_gradient_set(&mut sets_rng);
                for (j, &(steep, flat)) in STEEPER_PAIRS.iter().enumerate() {
                    let mut rng = root.fork(10_000 + (i * STEEPER_PAIRS.len() + j) as u64);
                    let rep = steeper_compare(steep, flat, &grads, cfg.samples, &mut rng)?;
                    total += 1;
                    oracle_fail += usize::from(!rep.oracle_holds);
                    mc_fail += usize::from(!rep.monte_carlo_holds);
                }
            }
            Ok(vec![Check::new(
                "steeper_activation_ordering",
                oracle_fail == 0 && mc_fail == 0,
                format!("{oracle_fail}/{total} oracle violations, {mc_fail}/{total} Monte Carlo violations"),
            )])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{quad_pair_problem, Sines};

    #[test]
    fn closed_form_examples() {
        let (e, v) = closed_form_stats(1.0, 0.0, 0.0).unwrap();
        assert!((e + 0.5).abs() < 1e-15 && (v - 0.25).abs() < 1e-15);
        let (e, v) = closed_form_stats(7.0, 3.0, 1.0).unwrap();
        assert!((e + 16.0).abs() < 1e-12 && (v - 336.0).abs() < 1e-9);
        for k in [0.0, 0.3, 1.0] {
            assert_eq!(closed_form_stats(2.5, 2.5, k).unwrap(), (0.0, 0.0));
        }
        assert!(matches!(closed_form_stats(0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(closed_form_stats(1.0, 1.0, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn enumeration_examples() {
        // dL = -28 with prob 0.7, +12 with prob 0.3
        let (e, v) = enumerate_stats(&[7.0, -3.0], 1.0);
        assert!((e + 16.0).abs() < 1e-12 && (v - 336.0).abs() < 1e-9);
        // dL in {-1, 0} with prob 1/2 each
        let (e, v) = enumerate_stats(&[1.0], 0.0);
        assert!((e + 0.5).abs() < 1e-15 && (v - 0.25).abs() < 1e-15);
        assert_eq!(enumerate_stats(&[0.0, 0.0], 1.0), (0.0, 0.0));
    }

    #[test]
    fn closed_form_agrees_with_enumeration() {
        let mut rng = RngStream::new(123, 0);
        for _ in 0..100 {
            let count = 1 + (rng.next_u64() % 6) as usize;
            let grads: Vec<f64> = (0..count).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let k = rng.next_f64();
            let (p, n) = split_masses(&grads);
            let (ce, cv) = closed_form_stats(p, n, k).unwrap();
            let (ee, ev) = enumerate_stats(&grads, k);
            let scale = (p + n).powi(4).max(1.0);
            assert!((ce - ee).abs() <= 1e-12 * scale, "{grads:?} k={k}");
            assert!((cv - ev).abs() <= 1e-12 * scale, "{grads:?} k={k}");
        }
    }

    #[test]
    fn mc_matches_fixed_case() {
        let r = mc_delta_loss(&[7.0, -3.0], 1.0, 200_000, &mut RngStream::new(4, 0)).unwrap();
        assert!(r.mean_within(4.0), "{r:?}");
        assert!(r.rel_var_error() < 0.02, "{r:?}");
    }

    #[test]
    fn all_positive_set_is_deterministic() {
        for k in [0.0, 0.5, 1.0] {
            let r = mc_delta_loss(&[3.0, 1.0], k, MIN_SAMPLES, &mut RngStream::new(1, 0)).unwrap();
            if k == 1.0 {
                assert_eq!(r.mean, -16.0);
                assert_eq!(r.var, 0.0);
            }
            assert!(r.z_mean.is_finite() && r.z_var.is_finite());
        }
    }

    #[test]
    fn mc_rejects_too_few_samples() {
        assert!(mc_delta_loss(&[1.0], 1.0, 10, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn sweep_on_fixed_case() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let rep = monotonicity_sweep(&[7.0, -3.0], &grid, 50_000, &mut RngStream::new(6, 0)).unwrap();
        let means: Vec<f64> = rep.rows.iter().map(|r| r.expected_mean.abs()).collect();
        for (m, want) in means.iter().zip([8.0, 10.0, 12.0, 14.0, 16.0]) {
            assert!((m - want).abs() < 1e-12);
        }
        assert!((rep.rows[0].expected_var - 400.0).abs() < 1e-9);
        assert!((rep.rows[4].expected_var - 336.0).abs() < 1e-9);
        assert!(rep.closed_form_monotone && rep.monte_carlo_consistent);

        let flat = monotonicity_sweep(&[2.0, -2.0], &grid, MIN_SAMPLES, &mut RngStream::new(6, 0)).unwrap();
        assert!(flat.rows.iter().all(|r| r.expected_mean == 0.0 && r.expected_var == 0.0));
        assert!(flat.closed_form_monotone);

        assert!(monotonicity_sweep(&[1.0], &[0.5, 0.2], MIN_SAMPLES, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn steeper_clipped_member() {
        let rep = steeper_compare(2.0, 1.0, &[7.0, -3.0], 100_000, &mut RngStream::new(8, 0)).unwrap();
        // f(0.7) = 0.9 for k = 2: dL = -28 w.p. 0.9, +12 w.p. 0.1
        assert!((rep.steep.expected_mean + 24.0).abs() < 1e-12);
        assert!((rep.steep.expected_var - 144.0).abs() < 1e-9);
        assert!(rep.oracle_holds && rep.monte_carlo_holds);
        assert!(rep.steep.mean < rep.flat.mean && rep.steep.var < rep.flat.var);

        let same = steeper_compare(1.0, 1.0, &[7.0, -3.0], MIN_SAMPLES, &mut RngStream::new(8, 0)).unwrap();
        assert_eq!(same.steep.expected_mean, same.flat.expected_mean);
        let pos = steeper_compare(3.0, 0.5, &[1.0, 2.0], MIN_SAMPLES, &mut RngStream::new(8, 0)).unwrap();
        // all-positive set: k = 3 always keeps, k = 0.5 keeps with prob 0.75
        assert!(pos.oracle_holds && pos.monte_carlo_holds && pos.steep.var == 0.0);
        assert!((pos.flat.expected_mean + 6.75).abs() < 1e-12);
    }

    #[test]
    fn joint_minimum_detection() {
        assert!(!check_joint_minimum(&quad_pair_problem(1.0), &[0.0], 1e-3));
        assert!(check_joint_minimum(&quad_pair_problem(0.0), &[0.0], 1e-3));
        // permuting tasks cannot change the answer
        let a = Sines::new(vec![(1.0, 0.0), (2.0, 0.3)]);
        let b = Sines::new(vec![(2.0, 0.3), (1.0, 0.0)]);
        for x in [-1.0, 0.2, 2.5] {
            assert_eq!(check_joint_minimum(&a, &[x], 0.5), check_joint_minimum(&b, &[x], 0.5));
        }
    }

    #[test]
    fn escape_at_conflicting_point() {
        let cfg = GradDropConfig::new(2);
        let r = graddrop_escape(&quad_pair_problem(1.0), &[0.0], &cfg, 2000).unwrap();
        assert_eq!(r.nonzero, 2000);
        assert!((r.positive_fraction() - 0.5).abs() < 0.05);
        let r = graddrop_escape(&quad_pair_problem(0.0), &[0.0], &cfg, 2000).unwrap();
        assert_eq!(r.nonzero, 0);
    }

    #[test]
    fn prop2_outward_from_component_minimum() {
        let p = quad_pair_problem(1.0);
        let cfg = GradDropConfig::new(2);
        let rep = check_prop2(&p, &[1.0], &[1.0], &[0.0, 0.01, 0.05, 0.1], &cfg, MIN_SAMPLES, &mut RngStream::new(0, 0)).unwrap();
        // both gradients positive: update is 4 + 4d with certainty
        for &(d, mean, se) in &rep.rows {
            assert!((mean - (4.0 + 4.0 * d)).abs() < 1e-12, "{mean}");
            assert!(se < 1e-12);
        }
        assert!(rep.strictly_increasing && rep.nondecreasing);
    }

    #[test]
    fn prop2_toward_other_minimum_shrinks() {
        // at x = 1 - d: grads (-2d, 4 - 2d), E|update| = 4 - 4d + 2d^2 by enumeration
        let p = quad_pair_problem(1.0);
        let cfg = GradDropConfig::new(2);
        let rep = check_prop2(&p, &[1.0], &[-1.0], &[0.01, 0.05, 0.1], &cfg, 200_000, &mut RngStream::new(1, 0)).unwrap();
        for &(d, mean, se) in &rep.rows {
            let want = 4.0 - 4.0 * d + 2.0 * d * d;
            assert!((mean - want).abs() < 4.0 * se + 1e-12, "d={d}: {mean} vs {want}");
        }
        assert!(!rep.strictly_increasing);
    }

    #[test]
    fn prop2_preconditions() {
        let p = quad_pair_problem(1.0);
        let cfg = GradDropConfig::new(2);
        let mut rng = RngStream::new(0, 0);
        assert!(check_prop2(&p, &[0.0], &[1.0], &[0.1], &cfg, MIN_SAMPLES, &mut rng).is_err());
        assert!(check_prop2(&p, &[1.0], &[1.0], &[0.1, 0.01], &cfg, MIN_SAMPLES, &mut rng).is_err());
    }

    #[test]
    fn single_task_prop2_is_linear() {
        let p = Sines::new(vec![(1.0, 0.0)]);
        let x_min = -std::f64::consts::FRAC_PI_2;
        let cfg = GradDropConfig::new(1);
        let rep = check_prop2(&p, &[x_min], &[1.0], &[0.001, 0.002, 0.004], &cfg, MIN_SAMPLES, &mut RngStream::new(0, 0)).unwrap();
        for &(d, mean, se) in &rep.rows {
            assert!(se < 1e-12);
            assert!((mean - d.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn quick_suites_pass() {
        let cfg = SuiteConfig {
            samples: 20_000,
            seed: 0,
            sets: 3,
        };
        for suite in Suite::ALL {
            let checks = run_suite(suite, &cfg).unwrap();
            assert!(!checks.is_empty());
            for c in checks {
                // variance tolerance is too tight for 2e4 samples; only check structure there
                if c.name != "closed_form_statistics" {
                    assert!(c.passed, "{}: {}", c.name, c.detail);
                }
            }
        }
    }

    #[test]
    fn keep_probability_matches_purity() {
        assert!((keep_positive_probability(&[7.0, -3.0], 1.0).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(keep_positive_probability(&[7.0, -3.0], 0.0).unwrap(), 0.5);
    }
}
