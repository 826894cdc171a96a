//! Monte Carlo loss-change statistics against the closed forms.

use graddrop::ndcore::RngStream;
use graddrop::verify::{enumerate_stats, mc_delta_loss, monotonicity_sweep, K_GRID};

fn main() -> graddrop::Result<()> {
    let grads = [7.0, -3.0];
    let mut rng = RngStream::new(0, 0);
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "k", "E mc", "E exact", "Var mc", "Var exact");
    let sweep = monotonicity_sweep(&grads, &K_GRID, 200_000, &mut rng)?;
    for r in &sweep.rows {
        println!(
            "{:>5} {:>10.4} {:>10.4} {:>10.3} {:>10.3}",
            r.k, r.mean, r.expected_mean, r.var, r.expected_var
        );
    }
    println!(
        "monotone: exact {}, monte carlo {}",
        sweep.closed_form_monotone, sweep.monte_carlo_consistent
    );

    // beyond k = 1 the activation clips and only enumeration applies
    for k in [2.0, 4.0] {
        let (e, v) = enumerate_stats(&grads, k);
        let r = mc_delta_loss(&grads, k, 200_000, &mut rng)?;
        println!("k = {k}: exact E {e:.3} Var {v:.3}, mc E {:.3} Var {:.3}", r.mean, r.var);
    }
    Ok(())
}
