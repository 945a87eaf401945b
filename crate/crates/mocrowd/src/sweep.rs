//! Repeated runs along one experimental axis.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use mocrowd_core::engine::ScenarioConfig;
use mocrowd_core::quality::AggregationMethod;
use mocrowd_core::stats;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{run_scenario, HarnessError, ResultSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Dispatch fanout.
    AnswersPerQuestion,
    /// Worker count is chosen so each worker gets about this many questions.
    QuestionsPerWorker,
    SpammerRatio,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::AnswersPerQuestion => "answers_per_question",
            Axis::QuestionsPerWorker => "questions_per_worker",
            Axis::SpammerRatio => "spammer_ratio",
        }
    }

    /// `base` with the axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, HarnessError> {
        let mut c = base.clone();
        match self {
            Axis::AnswersPerQuestion => c.dispatch.fanout = count(self, value)?,
            Axis::QuestionsPerWorker => {
                let per_worker = count(self, value)? as u64;
                let answers = c.tasks.total_questions() * c.dispatch.fanout as u64;
                c.world.n_workers = answers.div_ceil(per_worker).max(1) as usize;
            }
            Axis::SpammerRatio => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(HarnessError::InvalidSpec(format!("spammer ratio {value} outside [0, 1]")));
                }
                c.world.spammer_ratio = value;
            }
        }
        Ok(c)
    }
}

fn count(axis: Axis, value: f64) -> Result<usize, HarnessError> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(HarnessError::InvalidSpec(format!("{} needs positive integers, got {value}", axis.name())))
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.replace('-', "_").as_str() {
            "answers_per_question" => Ok(Axis::AnswersPerQuestion),
            "questions_per_worker" => Ok(Axis::QuestionsPerWorker),
            "spammer_ratio" => Ok(Axis::SpammerRatio),
            _ => Err(HarnessError::InvalidSpec(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub base: ScenarioConfig,
    /// Accuracy a method must reach for [`TargetRow`].
    #[serde(default = "default_target")]
    pub target_accuracy: f64,
}

fn default_target() -> f64 {
    0.9
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>, repetitions: usize, base: ScenarioConfig) -> Self {
        SweepSpec { axis, values, repetitions, base, target_accuracy: default_target() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::InvalidSpec("no axis values".into()));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::InvalidSpec("repetitions must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.target_accuracy) {
            return Err(HarnessError::InvalidSpec("target accuracy outside [0, 1]".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: f64,
    pub repetition: usize,
    pub result: ResultSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: Axis,
    pub value: f64,
    pub method: AggregationMethod,
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation across repetitions.
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub method: AggregationMethod,
    pub target: f64,
    /// Smallest axis value whose mean accuracy reached the target.
    pub smallest_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Ordered by (value, repetition).
    pub runs: Vec<SweepRun>,
    /// Ordered by value then method.
    pub summary: Vec<SummaryRow>,
    pub targets: Vec<TargetRow>,
}

/// One run per (value, repetition), repetition `i` seeded `base.seed + i`.
/// Runs execute in parallel; results are assembled in (value, repetition)
/// order.
pub fn sweep(spec: &SweepSpec) -> Result<SweepOutcome, HarnessError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|v| (0..spec.repetitions).map(move |r| (v, r))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(v, r)| {
            let value = spec.values[v];
            let mut config = spec.axis.apply(&spec.base, value)?;
            config.seed = spec.base.seed.wrapping_add(r as u64);
            Ok(SweepRun { value, repetition: r, result: run_scenario(&config)? })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let methods = &spec.base.quality.methods;
    let mut summary = Vec::new();
    for (v, &value) in spec.values.iter().enumerate() {
        let group = &runs[v * spec.repetitions..(v + 1) * spec.repetitions];
        for &method in methods {
            let acc: Vec<f64> = group.iter().map(|r| r.result.accuracy(method).unwrap_or(0.0)).collect();
            summary.push(SummaryRow {
                axis: spec.axis,
                value,
                method,
                runs: acc.len(),
                mean_accuracy: stats::mean(&acc),
                std_accuracy: stats::std_dev(&acc),
            });
        }
    }

    let targets = methods
        .iter()
        .map(|&method| TargetRow {
            method,
            target: spec.target_accuracy,
            smallest_value: summary
                .iter()
                .filter(|row| row.method == method && row.mean_accuracy >= spec.target_accuracy)
                .map(|row| row.value)
                .min_by(f64::total_cmp),
        })
        .collect();

    Ok(SweepOutcome { runs, summary, targets })
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "value", "method", "runs", "mean_accuracy", "std_accuracy"])?;
    for r in rows {
        w.write_record([
            r.axis.name().to_string(),
            r.value.to_string(),
            r.method.name().to_string(),
            r.runs.to_string(),
            r.mean_accuracy.to_string(),
            r.std_accuracy.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-run accuracies, one row per (value, repetition, method).
pub fn write_runs<W: Write>(runs: &[SweepRun], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "repetition", "seed", "fingerprint", "method", "accuracy"])?;
    for r in runs {
        for rep in &r.result.aggregations {
            w.write_record([
                r.value.to_string(),
                r.repetition.to_string(),
                r.result.config.seed.to_string(),
                r.result.fingerprint.clone(),
                rep.method.clone(),
                rep.accuracy.map_or(String::new(), |a| a.to_string()),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_targets<W: Write>(rows: &[TargetRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "target", "smallest_value"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.target.to_string(),
            r.smallest_value.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
