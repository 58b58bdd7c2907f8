//! Experiment orchestration: configuration, seeded Monte Carlo replication,
//! oracle-vs-adaptive comparison, rate regression across sample sizes, and
//! report emission.

pub mod bounds_io;
pub mod config;
pub mod rates;
pub mod replicate;
pub mod report;
pub mod verify;

pub use bounds_io::{emit_bound, BoundRequest};
pub use config::{
    ExperimentConfig, FilterBlock, FilterKindConfig, OutputFormat, PenaltyBlock, ProblemBlock,
    RunBlock, ScheduleConfig, Sigma2Source,
};
pub use rates::{fit_line, fit_loglog, rate_study, RatePoint, RateStudyReport, SlopeFit};
pub use replicate::{
    monte_carlo, run_replicate, run_replicate_in, run_replicate_traced, Aggregates,
    MonteCarloReport, ProblemContext, ReplicateResult,
};
pub use report::{
    emit_rates, emit_select, emit_simulate, write_objective_csv, write_rate_csv,
    write_replicates_csv, write_trace_csv, RateSummary, SelectionSummary, SimulateSummary,
};
pub use verify::run_verification;
