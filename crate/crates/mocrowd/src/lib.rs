//! Running, sweeping and persisting mocrowd scenarios.
//!
//! [`run_scenario`] simulates one [`ScenarioConfig`](mocrowd_core::engine::ScenarioConfig)
//! and evaluates it with every configured aggregation method. [`sweep`] repeats
//! that over one experimental axis, [`hypothesis_experiments`] runs the paired
//! dispatch comparisons, and [`export_results`] writes a run to disk.

mod error;
pub mod export;
pub mod hypotheses;
pub mod presets;
mod result;
pub mod sweep;

pub use error::HarnessError;
pub use export::{export_results, load_config, read_events, Event, Manifest};
pub use hypotheses::{hypothesis_experiments, Comparison, HypothesisReport, HypothesisResult};
pub use result::{fingerprint, run_scenario, ResultSet};
pub use sweep::{sweep, Axis, SummaryRow, SweepOutcome, SweepRun, SweepSpec, TargetRow};

pub use mocrowd_core as core;
