//! Leak sweep on the batch-separated transfer toy.
//!
//! The source task's leak runs from 0 to 1 while the transfer task's runs
//! the other way; the final transfer loss is reported per setting.

use graddrop::optim::{Optimizer, Schedule};
use graddrop::runx::{run_experiment, ExperimentSpec, Leak, MethodKind, MethodSpec, ProblemSpec};

fn main() -> graddrop::Result<()> {
    let methods = [0.0, 0.25, 0.5, 0.75, 1.0]
        .into_iter()
        .map(|source| {
            let mut m = MethodSpec::new(MethodKind::Graddrop);
            m.name = format!("source_{source}");
            m.leaks = Some(vec![Leak::try_from(source).unwrap(), Leak::try_from(1.0 - source).unwrap()]);
            m
        })
        .collect();
    let mut spec = ExperimentSpec::new(ProblemSpec::Transfer { seed: 0 }, methods)?;
    spec.trials = 8;
    spec.steps = 1500;
    spec.optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    spec.schedule = Schedule::Constant { lr: 0.01 };
    let spec = spec.resolve()?;

    let result = run_experiment(&spec, 0)?;
    println!("{:<12} {:>14} {:>14}", "setting", "source loss", "transfer loss");
    for m in &spec.methods {
        let recs: Vec<_> = result.method_records(&m.name).collect();
        let mean = |task: usize| recs.iter().map(|r| r.final_task_losses[task]).sum::<f64>() / recs.len() as f64;
        println!("{:<12} {:>14.6} {:>14.6}", m.name, mean(0), mean(1));
    }
    Ok(())
}
