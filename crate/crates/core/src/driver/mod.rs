//! Orchestration of adaptive runs and the metrics used to judge them.

mod config;
mod experiments;
mod metrics;
mod solver;

pub use config::{AdeimSettings, ConfigError, ResolvedSettings, RunConfig, Strategy};
pub use experiments::{
    bench, bifurcation_sweep, build_model, compare, compare_variants, run_adeim, run_fom,
    BenchReport, BifurcationPoint, Comparison, DriverError, Environment, ModelKind,
    MultiComparison, ProbeSeries, VariantResult,
};
pub use metrics::{avg_rel_error, max_eta, probe, probe_index, ErrorAccumulator, Field, MetricError};
pub use solver::{run_adeim_with, AdeimSolver, StepError};
