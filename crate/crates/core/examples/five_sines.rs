//! One trial of each method on the five-sine toy, from the same start.

use graddrop::combine::{GradDropConfig, MgdaConfig};
use graddrop::optim::{train, Combiner, Optimizer, Schedule, TrainConfig, TrialSeeds};
use graddrop::problems::{grid_search_min, sines_problem};

fn main() -> graddrop::Result<()> {
    let p = sines_problem();
    let best = grid_search_min(&p, -10.0, 10.0, 1e-4)?;
    println!("grid optimum: L* = {:.6} at x = {:.6}", best.loss, best.x);

    let methods = [
        ("graddrop", Combiner::GradDrop(GradDropConfig::new(5)), None),
        ("random_graddrop", Combiner::GradDrop(GradDropConfig::new(5).with_k(0.0)), None),
        ("naive", Combiner::Naive, None),
        ("clip", Combiner::Naive, Some(1.0)),
        ("pcgrad", Combiner::PcGrad { iterative: false }, None),
        ("iterative_pcgrad", Combiner::PcGrad { iterative: true }, None),
        ("mgda", Combiner::Mgda(MgdaConfig::default()), None),
    ];
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    for (name, combiner, clip) in methods {
        let cfg = TrainConfig {
            combiner,
            clip,
            optimizer: Optimizer::Sgd,
            schedule: Schedule::default(),
            steps: 10_000,
        };
        let rec = train(&p, &cfg, TrialSeeds::from_seed(seed))?;
        println!(
            "{name:<17} start {:>8.4}  final {:>8.4}  x = {:>8.4}",
            rec.initial_loss(),
            rec.final_loss(),
            rec.final_w[0]
        );
    }
    Ok(())
}
