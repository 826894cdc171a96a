use serde::Serialize;

use crate::optim::TrialRecord;

/// Boxplot statistics of one method's final losses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Fraction of all trials ending within tolerance of the grid optimum,
    /// when the problem has one.
    pub oracle_frac: Option<f64>,
    pub diverged: usize,
    pub trials: usize,
    pub mean_wall_ms: f64,
    /// Every trial diverged; the loss statistics are NaN.
    pub failed: bool,
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarizes one method. Diverged trials are counted, left out of the
/// quantiles, and count as misses in the oracle fraction.
pub fn summarize(method: &str, records: &[TrialRecord], oracle: Option<f64>, tol: f64) -> SummaryRow {
    let mut finals: Vec<f64> = records.iter().filter(|r| !r.diverged).map(TrialRecord::final_loss).collect();
    finals.sort_by(f64::total_cmp);
    let diverged = records.len() - finals.len();
    let failed = finals.is_empty();
    let stat = |q: f64| if failed { f64::NAN } else { quantile(&finals, q) };
    let mean = if failed {
        f64::NAN
    } else {
        finals.iter().sum::<f64>() / finals.len() as f64
    };
    let oracle_frac = oracle.map(|l_star| {
        let hits = finals.iter().filter(|f| (*f - l_star).abs() <= tol).count();
        hits as f64 / records.len().max(1) as f64
    });
    let mean_wall_ms = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.wall_ms).sum::<f64>() / records.len() as f64
    };
    SummaryRow {
        method: method.to_string(),
        min: stat(0.0),
        q1: stat(0.25),
        median: stat(0.5),
        q3: stat(0.75),
        max: stat(1.0),
        mean,
        oracle_frac,
        diverged,
        trials: records.len(),
        mean_wall_ms,
        failed,
    }
}
