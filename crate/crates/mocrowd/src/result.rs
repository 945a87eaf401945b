use std::fmt::Write as _;
use std::time::Instant;

use mocrowd_core::engine::{aggregate, gamification, run_metrics, simulate, RunMetrics, ScenarioConfig, SimulationRun};
use mocrowd_core::quality::{AggregationMethod, AggregationReport, GamificationScore};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Everything one scenario run produced.
#[derive(Debug, Clone, Serialize)]
pub struct ResultSet {
    /// SHA-256 of the canonical JSON of `config`, hex encoded.
    pub fingerprint: String,
    pub config: ScenarioConfig,
    pub run: SimulationRun,
    /// One report per configured method, in configuration order.
    pub aggregations: Vec<AggregationReport>,
    pub metrics: RunMetrics,
    /// Leaderboard at the end of the simulated period.
    pub leaderboard: Vec<GamificationScore>,
}

impl ResultSet {
    pub fn report(&self, method: AggregationMethod) -> Option<&AggregationReport> {
        self.aggregations.iter().find(|r| r.method == method.name())
    }

    pub fn accuracy(&self, method: AggregationMethod) -> Option<f64> {
        self.report(method).and_then(|r| r.accuracy)
    }
}

pub fn fingerprint(config: &ScenarioConfig) -> Result<String, HarnessError> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Simulates `config` and evaluates it. Everything but the per-method
/// `compute_seconds` is a pure function of the config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultSet, HarnessError> {
    let run = simulate(config)?;
    let mut aggregations = Vec::with_capacity(config.quality.methods.len());
    for &method in &config.quality.methods {
        let start = Instant::now();
        let mut report = aggregate(&run, method, &config.quality)?;
        report.compute_seconds = start.elapsed().as_secs_f64();
        aggregations.push(report);
    }
    let metrics = run_metrics(&run);
    let leaderboard = gamification(&run, &config.quality, config.duration_s)?;
    Ok(ResultSet { fingerprint: fingerprint(config)?, config: config.clone(), run, aggregations, metrics, leaderboard })
}
