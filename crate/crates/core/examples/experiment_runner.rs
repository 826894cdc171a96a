//! Runs a JSON spec and writes the CSV outputs.
//!
//! ```text
//! cargo run --release --example experiment_runner -- specs/toy_sines.json out/toy
//! ```

use std::path::PathBuf;

use graddrop::runx::{emit, parse_spec, run_experiment};

fn main() -> graddrop::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec_path = PathBuf::from(args.next().unwrap_or_else(|| "specs/toy_sines.json".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/example".into()));

    let mut spec = parse_spec(&spec_path)?;
    // a quick look; the full spec takes a few minutes
    spec.trials = spec.trials.min(20);
    let result = run_experiment(&spec, 0)?;
    for s in &result.summaries {
        println!(
            "{:<18} median {:>8.4}  iqr [{:.4}, {:.4}]  oracle {}",
            s.method,
            s.median,
            s.q1,
            s.q3,
            s.oracle_frac.map_or("-".into(), |f| format!("{f:.2}"))
        );
    }
    for path in emit(&result, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
