use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use graddrop::problems::{grid_search_min, sines_problem};
use graddrop::runx::{emit, parse_spec, run_experiment};
use graddrop::verify::{run_suite, Suite, SuiteConfig};

#[derive(Parser)]
#[command(version, about = "GradDrop experiments and statistical checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write CSV results.
    Run {
        spec: PathBuf,
        /// Output directory. Falls back to the spec's `out`, then `runs`.
        #[arg(long, env = "GRADDROP_OUT")]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        trials_override: Option<usize>,
    },
    /// Monte Carlo checks of GradDrop's statistical properties.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Grid-search optimum of a built-in problem.
    Oracle {
        #[command(subcommand)]
        problem: OracleProblem,
    },
}

#[derive(Subcommand)]
enum OracleProblem {
    Sines {
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Prop1,
    Prop2,
    Prop3,
    Corollary,
    All,
}

fn run(cli: Cli) -> graddrop::Result<bool> {
    match cli.command {
        Command::Run {
            spec,
            out,
            workers,
            trials_override,
        } => {
            let mut spec = parse_spec(&spec)?;
            if let Some(t) = trials_override {
                spec.trials = t;
            }
            let dir = out.or_else(|| spec.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
            let result = run_experiment(&spec, workers)?;
            emit(&result, &dir)?;
            println!("{:<20} {:>10} {:>10} {:>10} {:>8} {:>8}", "method", "q1", "median", "q3", "oracle", "diverged");
            for s in &result.summaries {
                let oracle = s.oracle_frac.map_or("-".to_string(), |f| format!("{f:.3}"));
                println!(
                    "{:<20} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8}",
                    s.method, s.q1, s.median, s.q3, oracle, s.diverged
                );
            }
            println!("results in {}", dir.display());
            Ok(result.all_methods_trained())
        }
        Command::Verify { suite, samples, seed } => {
            let suites: Vec<Suite> = match suite {
                SuiteArg::Prop1 => vec![Suite::Prop1],
                SuiteArg::Prop2 => vec![Suite::Prop2],
                SuiteArg::Prop3 => vec![Suite::Prop3],
                SuiteArg::Corollary => vec![Suite::Corollary],
                SuiteArg::All => Suite::ALL.to_vec(),
            };
            let cfg = SuiteConfig {
                samples,
                seed,
                ..SuiteConfig::default()
            };
            let mut all_passed = true;
            for suite in suites {
                for check in run_suite(suite, &cfg)? {
                    let status = if check.passed { "PASS" } else { "FAIL" };
                    println!("{status} {}/{}: {}", suite.name(), check.name, check.detail);
                    all_passed &= check.passed;
                }
            }
            Ok(all_passed)
        }
        Command::Oracle {
            problem: OracleProblem::Sines { lo, hi, step },
        } => {
            let min = grid_search_min(&sines_problem(), lo, hi, step)?;
            println!("x* = {:.12}", min.x);
            println!("L* = {:.12}", min.loss);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
