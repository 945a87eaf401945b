//! Paired-seed dispatch comparisons.
//!
//! Each hypothesis runs two arms of the same base scenario over the same
//! seeds and reports, per metric, both arm means, the mean paired difference
//! (first arm minus second) and its standard error. No test statistic is
//! computed; effect sizes are left to the reader.
//!
//! - H1: emergency broadcast vs ranked dispatch, with every task of the base
//!   mix turned into an emergency. Geofence coverage and time to first answer.
//! - H2: profile-aware ranking (the base weights) vs random assignment.
//!   Majority-vote accuracy and mean PRS.
//! - H3: location-aware ranking (the base geo and class weights, skill
//!   ignored) vs random assignment. Mean response time and majority-vote
//!   accuracy.

use std::io::Write;

use mocrowd_core::dispatch::{ContextWeights, DispatchPolicy};
use mocrowd_core::domain::TaskKind;
use mocrowd_core::engine::{simulate, EmergencyMode, ScenarioConfig, SimulationRun};
use mocrowd_core::quality::AggregationMethod;
use mocrowd_core::stats;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{run_scenario, HarnessError, ResultSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub arm_a: String,
    pub arm_b: String,
    /// Seeds where the metric was defined in both arms.
    pub n: usize,
    /// Arm means and the mean of `a - b`; `None` when `n` is 0.
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub diff: Option<f64>,
    /// Standard error of `diff`.
    pub se: f64,
    /// Per-seed `(a, b)`, `None` where either side is undefined.
    pub per_seed: Vec<Option<(f64, f64)>>,
}

impl Comparison {
    fn new(metric: &str, arm_a: &str, arm_b: &str, per_seed: Vec<Option<(f64, f64)>>) -> Self {
        let pairs: Vec<(f64, f64)> = per_seed.iter().flatten().copied().collect();
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let defined = |x: f64| (!pairs.is_empty()).then_some(x);
        Comparison {
            metric: metric.into(),
            arm_a: arm_a.into(),
            arm_b: arm_b.into(),
            n: pairs.len(),
            mean_a: defined(stats::mean(&a)),
            mean_b: defined(stats::mean(&b)),
            diff: defined(stats::mean(&d)),
            se: stats::std_error(&d),
            per_seed,
        }
    }

    /// Whether `diff` exceeds its standard error in the given direction.
    pub fn beyond_se(&self, positive: bool) -> bool {
        match self.diff {
            Some(d) if positive => d > self.se,
            Some(d) => -d > self.se,
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub id: String,
    pub comparisons: Vec<Comparison>,
    /// Conditions worth knowing about, e.g. empty geofences.
    pub flags: Vec<String>,
}

impl HypothesisResult {
    pub fn comparison(&self, metric: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub seeds: Vec<u64>,
    pub h1: HypothesisResult,
    pub h2: HypothesisResult,
    pub h3: HypothesisResult,
}

/// Runs every arm of every hypothesis over `seeds` consecutive seeds
/// starting at `base.seed`.
pub fn hypothesis_experiments(base: &ScenarioConfig, seeds: usize) -> Result<HypothesisReport, HarnessError> {
    if seeds == 0 {
        return Err(HarnessError::InvalidConfig("at least one seed is required".into()));
    }
    base.validate()?;
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| base.seed.wrapping_add(i)).collect();
    Ok(HypothesisReport {
        h1: h1(base, &seed_list)?,
        h2: h2(base, &seed_list)?,
        h3: h3(base, &seed_list)?,
        seeds: seed_list,
    })
}

fn ranked_weights(base: &ScenarioConfig) -> ContextWeights {
    match &base.dispatch.policy {
        DispatchPolicy::Ranked { weights } => *weights,
        DispatchPolicy::Random => ContextWeights::default(),
    }
}

fn with_policy(base: &ScenarioConfig, policy: DispatchPolicy) -> ScenarioConfig {
    let mut c = base.clone();
    c.dispatch.policy = policy;
    c
}

fn paired<T: Send, F>(configs: [&ScenarioConfig; 2], seeds: &[u64], run: F) -> Result<Vec<[T; 2]>, HarnessError>
where
    F: Fn(&ScenarioConfig) -> Result<T, HarnessError> + Sync,
{
    seeds
        .par_iter()
        .map(|&s| {
            let go = |c: &ScenarioConfig| {
                let mut c = c.clone();
                c.seed = s;
                run(&c)
            };
            Ok([go(configs[0])?, go(configs[1])?])
        })
        .collect()
}

fn metric_pairs<T>(runs: &[[T; 2]], f: impl Fn(&T) -> Option<f64>) -> Vec<Option<(f64, f64)>> {
    runs.iter().map(|[a, b]| f(a).zip(f(b))).collect()
}

fn h1(base: &ScenarioConfig, seeds: &[u64]) -> Result<HypothesisResult, HarnessError> {
    let mut emergency = base.clone();
    for c in &mut emergency.tasks.counts {
        c.kind = TaskKind::Emergency;
    }
    let mut ranked = emergency.clone();
    emergency.dispatch.emergency = EmergencyMode::Broadcast;
    ranked.dispatch.emergency = EmergencyMode::Ranked;
    let runs = paired([&emergency, &ranked], seeds, |c| Ok(simulate(c)?))?;

    let coverage = |r: &SimulationRun| {
        let v: Vec<f64> = r.emergencies.iter().filter(|e| !e.empty_geofence).map(|e| e.coverage).collect();
        (!v.is_empty()).then(|| stats::mean(&v))
    };
    let first = |r: &SimulationRun| {
        let v: Vec<f64> = r.emergencies.iter().filter_map(|e| e.time_to_first_answer_s).collect();
        (!v.is_empty()).then(|| stats::mean(&v))
    };
    let answered = |r: &SimulationRun| {
        let n = r.emergencies.len();
        (n > 0).then(|| r.emergencies.iter().filter(|e| e.time_to_first_answer_s.is_some()).count() as f64 / n as f64)
    };
    let empty: usize = runs.iter().map(|[a, _]| a.emergencies.iter().filter(|e| e.empty_geofence).count()).sum();
    let total: usize = runs.iter().map(|[a, _]| a.emergencies.len()).sum();
    let mut flags = Vec::new();
    if empty > 0 {
        flags.push(format!("{empty} of {total} emergency tasks had no worker inside the geofence (coverage 0)"));
    }
    Ok(HypothesisResult {
        id: "H1".into(),
        comparisons: vec![
            Comparison::new("geofence_coverage", "broadcast", "ranked", metric_pairs(&runs, coverage)),
            Comparison::new("time_to_first_answer_s", "broadcast", "ranked", metric_pairs(&runs, first)),
            Comparison::new("answered_fraction", "broadcast", "ranked", metric_pairs(&runs, answered)),
        ],
        flags,
    })
}

fn majority(rs: &ResultSet) -> Option<f64> {
    rs.accuracy(AggregationMethod::MajorityVote)
}

fn only_majority(c: &ScenarioConfig) -> ScenarioConfig {
    let mut c = c.clone();
    c.quality.methods = vec![AggregationMethod::MajorityVote];
    c
}

fn h2(base: &ScenarioConfig, seeds: &[u64]) -> Result<HypothesisResult, HarnessError> {
    let base = only_majority(base);
    let aware = with_policy(&base, DispatchPolicy::Ranked { weights: ranked_weights(&base) });
    let random = with_policy(&base, DispatchPolicy::Random);
    let runs = paired([&aware, &random], seeds, run_scenario)?;
    Ok(HypothesisResult {
        id: "H2".into(),
        comparisons: vec![
            Comparison::new("accuracy", "profile_ranked", "random", metric_pairs(&runs, majority)),
            Comparison::new("mean_prs", "profile_ranked", "random", metric_pairs(&runs, |r| r.metrics.mean_prs)),
        ],
        flags: Vec::new(),
    })
}

fn h3(base: &ScenarioConfig, seeds: &[u64]) -> Result<HypothesisResult, HarnessError> {
    let base = only_majority(base);
    let w = ranked_weights(&base);
    let (geo, class) = if w.w_geo + w.w_class > 0.0 { (w.w_geo, w.w_class) } else { (1.0, 1.0) };
    let weights = ContextWeights::new(geo, class, 0.0).map_err(mocrowd_core::engine::EngineError::from)?;
    let fenced = with_policy(&base, DispatchPolicy::Ranked { weights });
    let blind = with_policy(&base, DispatchPolicy::Random);
    let runs = paired([&fenced, &blind], seeds, run_scenario)?;
    let mut flags = Vec::new();
    if base.tasks.admissible.is_none() {
        flags.push("tasks admit only their own place's class; no admissible set configured".into());
    }
    Ok(HypothesisResult {
        id: "H3".into(),
        comparisons: vec![
            Comparison::new(
                "mean_response_s",
                "location_ranked",
                "random",
                metric_pairs(&runs, |r| r.metrics.mean_response_s),
            ),
            Comparison::new("accuracy", "location_ranked", "random", metric_pairs(&runs, majority)),
        ],
        flags,
    })
}

pub fn write_csv<W: Write>(report: &HypothesisReport, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hypothesis", "metric", "arm_a", "arm_b", "n", "mean_a", "mean_b", "diff", "se"])?;
    for h in [&report.h1, &report.h2, &report.h3] {
        for c in &h.comparisons {
            w.write_record([
                h.id.clone(),
                c.metric.clone(),
                c.arm_a.clone(),
                c.arm_b.clone(),
                c.n.to_string(),
                opt(c.mean_a),
                opt(c.mean_b),
                opt(c.diff),
                c.se.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}
