//! Monte-Carlo experiment harness behind the command-line tool.

pub mod config;
pub mod overhead;
pub mod runner;
pub mod sweep;

pub use config::{
    Allocator, Axis, Digital, GammaRule, PowerConvention, Scheme, SimConfig, SweepConfig, SystemConfig,
    TrainingConfig, Variant,
};
pub use overhead::{conflict_table, formula_rows, measure_additional, overhead_table, ConflictRow, OverheadRow, PartialScheme};
pub use runner::{
    run_monte_carlo, run_records, run_trial, run_trial_detailed, run_trial_on, AggregateResult, Scenario, TrialDetail,
    TrialRecord,
};
pub use sweep::{sweep, sweep_variants, write_csv, SweepRow, CSV_HEADER};
