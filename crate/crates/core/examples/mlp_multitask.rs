//! Shared-trunk MLP with several regression heads, trained with GradDrop
//! and with the plain sum, reporting the keep fraction along the way.

use graddrop::combine::GradDropConfig;
use graddrop::optim::{train, Combiner, Optimizer, Schedule, TrainConfig, TrialSeeds};
use graddrop::problems::{mlp_multitask_problem, Problem};

fn main() -> graddrop::Result<()> {
    let p = mlp_multitask_problem(0, 16, 4);
    let base = TrainConfig {
        combiner: Combiner::Naive,
        clip: None,
        optimizer: Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        schedule: Schedule::Constant { lr: 0.01 },
        steps: 2000,
    };
    let gd = TrainConfig {
        combiner: Combiner::GradDrop(GradDropConfig::new(p.n_tasks())),
        ..base.clone()
    };

    for (name, cfg) in [("naive", &base), ("graddrop", &gd)] {
        let rec = train(&p, cfg, TrialSeeds::from_seed(1))?;
        println!("{name}: {:.4} -> {:.5}, per task {:.5?}", rec.initial_loss(), rec.final_loss(), rec.final_task_losses);
        for &(step, kf) in rec.keep_fraction.iter().step_by(40) {
            println!("  step {step:>5}: keep fraction {kf:.3}");
        }
    }
    Ok(())
}
