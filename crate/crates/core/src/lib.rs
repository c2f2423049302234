//! Exact day-ahead scheduling of shared PV power in an islanded residential
//! microgrid: ingest half-hourly load/generation, build 0-1 programs for each
//! operating strategy, solve them exactly and report reliability indices.

pub mod config;
pub mod exec;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod solver;

pub use config::{ConfigLayer, RunConfig};
pub use ingest::{DayInstance, Dataset, EnergyWh};
pub use matrix::Matrix;
pub use model::{StrategyKind, StrategySpec, SwitchMatrix};
pub use pipeline::{PipelineError, RunReport};
pub use solver::{brute_force, solve, BinaryProgram, SolveLimits, SolveResult, SolveStatus};
