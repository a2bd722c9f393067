//! Monte-Carlo verification of the residuals and of the functional
//! inequality behind them.

mod fi;
mod independence;
mod persist;
pub mod stats;
mod sweep;
mod tail;
mod trials;

pub use fi::{fi_check, fi_check_functions, random_test_functions, FICheckOptions, FICheckResult, FIRow, TestFunction};
pub use independence::{independence_check, IndependenceOptions, IndependenceResult};
pub use persist::{load_batch, read_batch, read_tail_csv, save_batch, write_batch, write_tail_csv, SCHEMA_VERSION};
pub use sweep::{
    effective_rank_sweep, geometric_spectrum, proportional_sweep, EffectiveRankPreset, ProportionalPreset,
    SweepRow, SweepTable,
};
pub use tail::{binomial_upper_tail, tail_check, TailCheckOptions, TailCheckResult, TailRow, Verdict, DEFAULT_DELTAS};
pub use trials::{run_trial, run_trials, RunOptions, TrialBatch, TrialConfig, TrialRecord};
