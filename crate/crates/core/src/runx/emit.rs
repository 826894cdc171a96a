use std::fs;
use std::path::{Path, PathBuf};

use super::run::ExperimentResult;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 10] = [
    "method", "min", "q1", "median", "q3", "max", "mean", "oracle_frac", "diverged", "mean_wall_ms",
];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes `summary.csv`, `trials.csv`, `task_losses.csv`, the trajectory
/// files and `spec.resolved.json` into `dir`, creating it if needed.
/// Returns the written paths.
pub fn emit(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    write_csv(
        &path,
        &strings(&SUMMARY_HEADER),
        result.summaries.iter().map(|s| {
            vec![
                s.method.clone(),
                s.min.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
                s.mean.to_string(),
                s.oracle_frac.map(|f| f.to_string()).unwrap_or_default(),
                s.diverged.to_string(),
                s.mean_wall_ms.to_string(),
            ]
        }),
    )?;
    written.push(path);

    // records are grouped by method and sorted by trial
    let mut trials = Vec::with_capacity(result.records.len());
    for (i, r) in result.records.iter().enumerate() {
        let continues = i > 0 && result.records[i - 1].method == r.method;
        trials.push(if continues { trials[i - 1] + 1 } else { 0 });
    }

    let path = dir.join("trials.csv");
    write_csv(
        &path,
        &strings(&["method", "trial", "seed", "final_loss", "diverged", "wall_ms"]),
        result.records.iter().zip(&trials).map(|(r, t)| {
            vec![
                r.method.clone(),
                t.to_string(),
                r.seed.to_string(),
                r.final_loss().to_string(),
                r.diverged.to_string(),
                r.wall_ms.to_string(),
            ]
        }),
    )?;
    written.push(path);

    let n_tasks = result.records.first().map_or(0, |r| r.final_task_losses.len());
    let mut header = strings(&["method", "trial"]);
    header.extend((0..n_tasks).map(|i| format!("task_{i}")));
    let path = dir.join("task_losses.csv");
    write_csv(
        &path,
        &header,
        result.records.iter().zip(&trials).map(|(r, t)| {
            let mut row = vec![r.method.clone(), t.to_string()];
            row.extend(r.final_task_losses.iter().map(f64::to_string));
            row
        }),
    )?;
    written.push(path);

    for (r, &trial) in result.records.iter().zip(&trials) {
        if trial >= result.spec.traj_trials {
            continue;
        }
        let path = dir.join(format!("traj_{}_{trial}.csv", r.method));
        let mut keep = r.keep_fraction.iter().peekable();
        let rows = r.trajectory.iter().enumerate().map(|(step, loss)| {
            let kf = match keep.peek() {
                Some(&&(s, f)) if s == step => {
                    keep.next();
                    f.to_string()
                }
                _ => String::new(),
            };
            vec![step.to_string(), loss.to_string(), kf]
        });
        write_csv(&path, &strings(&["step", "sum_loss", "keep_fraction"]), rows)?;
        written.push(path);
    }

    let path = dir.join("spec.resolved.json");
    fs::write(&path, result.spec.to_json()).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
