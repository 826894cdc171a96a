//! Experiment runner: JSON specs, multi-trial sweeps, summaries and CSV output.
//!
//! A spec names a problem and a list of methods:
//!
//! ```json
//! {
//!   "problem": "sines",
//!   "methods": ["graddrop", "random_graddrop", {"name": "clip2", "kind": "clip", "clip": 2.0}],
//!   "trials": 200,
//!   "steps": 10000
//! }
//! ```
//!
//! Everything omitted takes its default, and the fully resolved spec is
//! written next to the results so a run can be replayed exactly.

mod emit;
mod run;
mod spec;
mod summary;

pub use emit::{emit, SUMMARY_HEADER};
pub use run::{run_experiment, trial_seeds, ExperimentResult, ORACLE_GRID};
pub use spec::{
    parse_spec, parse_spec_str, ExperimentSpec, Leak, MethodKind, MethodSpec, ProblemSpec, Slope,
};
pub use summary::{quantile, summarize, SummaryRow};
