use rayon::prelude::*;

use super::spec::ExperimentSpec;
use super::summary::{summarize, SummaryRow};
use crate::error::{Error, Result};
use crate::ndcore::mix_seed;
use crate::optim::{train, TrialRecord, TrialSeeds};
use crate::problems::grid_search_min;

/// Grid used to locate the optimum of one-dimensional problems.
pub const ORACLE_GRID: (f64, f64, f64) = (-10.0, 10.0, 1e-4);

/// Records and per-method summaries of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Sorted by method position in the spec, then trial.
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SummaryRow>,
    /// Grid-search optimum of the summed loss, for one-dimensional problems.
    pub oracle_loss: Option<f64>,
}

impl ExperimentResult {
    pub fn method_records(&self, name: &str) -> impl Iterator<Item = &TrialRecord> + '_ {
        let name = name.to_string();
        self.records.iter().filter(move |r| r.method == name)
    }

    pub fn summary(&self, name: &str) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| s.method == name)
    }

    /// True iff every method kept at least one trial finite.
    pub fn all_methods_trained(&self) -> bool {
        self.summaries.iter().all(|s| !s.failed)
    }
}

/// Seeds of trial `trial` under a method with the given fingerprint.
///
/// The starting point depends only on the base seed and trial, so every
/// method starts trial `t` from the same weights. The combiner stream also
/// mixes in the method fingerprint.
pub fn trial_seeds(base: u64, fingerprint: &str, trial: usize) -> TrialSeeds {
    let fp = u64::from_str_radix(&fingerprint[..16], 16).expect("fingerprints are hex");
    TrialSeeds {
        init: mix_seed(&[base, trial as u64]),
        combiner: mix_seed(&[base, fp, trial as u64]),
    }
}

/// Runs every (method, trial) pair on a pool of `workers` threads
/// (0 picks the available parallelism). Results do not depend on the
/// worker count.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult> {
    let spec = spec.clone().resolve()?;
    let problem = spec.problem.build();
    let configs: Vec<_> = spec
        .methods
        .iter()
        .map(|m| (m.name.clone(), m.fingerprint(), m.train_config(spec.steps)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|m| (0..spec.trials).map(move |t| (m, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut records = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, t)| {
                let (name, fp, cfg) = &configs[m];
                let mut rec = train(problem.as_ref(), cfg, trial_seeds(spec.seed, fp, t))?;
                rec.method = name.clone();
                rec.fingerprint = fp.clone();
                if !spec.timing {
                    rec.wall_ms = 0.0;
                }
                Ok(((m, t), rec))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by_key(|(key, _)| *key);
    let records: Vec<TrialRecord> = records.into_iter().map(|(_, r)| r).collect();

    let oracle_loss = if problem.dim() == 1 {
        let (lo, hi, step) = ORACLE_GRID;
        Some(grid_search_min(problem.as_ref(), lo, hi, step)?.loss)
    } else {
        None
    };
    let summaries = spec
        .methods
        .iter()
        .map(|m| {
            let recs: Vec<TrialRecord> = records.iter().filter(|r| r.method == m.name).cloned().collect();
            summarize(&m.name, &recs, oracle_loss, spec.oracle_tol)
        })
        .collect();

    Ok(ExperimentResult {
        spec,
        records,
        summaries,
        oracle_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runx::parse_spec_str;

    #[test]
    fn identical_methods_under_different_names_agree() {
        let spec = parse_spec_str(
            r#"{"problem": "sines", "trials": 1, "steps": 200, "methods": [
                {"name": "a", "kind": "graddrop"}, {"name": "b", "kind": "graddrop"}]}"#,
        )
        .unwrap();
        let res = run_experiment(&spec, 1).unwrap();
        assert_eq!(res.records.len(), 2);
        assert!(res.records[0].same_outcome(&res.records[1]));
        assert_eq!(res.records[0].method, "a");
    }

    #[test]
    fn seeds_are_distinct_across_trials_and_methods() {
        let spec = parse_spec_str(
            r#"{"problem": "sines", "methods": ["graddrop", "random_graddrop", "pcgrad", "mgda"]}"#,
        )
        .unwrap();
        let mut seen = std::collections::HashSet::new();
        for m in &spec.methods {
            for t in 0..spec.trials {
                assert!(seen.insert(trial_seeds(spec.seed, &m.fingerprint(), t).combiner));
            }
        }
        let a = trial_seeds(0, &spec.methods[0].fingerprint(), 3);
        let b = trial_seeds(0, &spec.methods[1].fingerprint(), 3);
        assert_eq!(a.init, b.init);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = parse_spec_str(
            r#"{"problem": {"name": "mlp", "tasks": 3, "hidden": 6}, "trials": 4, "steps": 30,
                "schedule": {"kind": "constant", "lr": 0.05},
                "methods": ["graddrop", "pcgrad", "naive"]}"#,
        )
        .unwrap();
        let one = run_experiment(&spec, 1).unwrap();
        let four = run_experiment(&spec, 4).unwrap();
        assert_eq!(one.records.len(), 12);
        for (a, b) in one.records.iter().zip(&four.records) {
            assert!(a.same_outcome(b) && a.method == b.method);
        }
        assert_eq!(one.oracle_loss, None);
        assert!(one.all_methods_trained());
    }

    #[test]
    fn one_dimensional_problems_get_an_oracle() {
        let spec = parse_spec_str(r#"{"problem": "quad_pair", "trials": 2, "steps": 50, "methods": ["naive"]}"#).unwrap();
        let res = run_experiment(&spec, 2).unwrap();
        assert!((res.oracle_loss.unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(res.summary("naive").unwrap().oracle_frac, Some(1.0));
    }
}
