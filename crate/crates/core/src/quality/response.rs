//! Response-time scores.

use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Answer, QualityError};
use crate::domain::TaskTypeId;

/// Parameters of the personal response time score.
///
/// `beta` is the best waiting factor: the longest wait, in seconds, after
/// which an answer is still considered on time. `t_min` floors very fast
/// answers so the score stays bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrs", into = "RawPrs")]
pub struct PrsParams {
    beta: f64,
    t_min: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPrs {
    beta: f64,
    #[serde(default = "default_t_min")]
    t_min: f64,
}

fn default_t_min() -> f64 {
    1.0
}

impl TryFrom<RawPrs> for PrsParams {
    type Error = QualityError;

    fn try_from(raw: RawPrs) -> Result<Self, QualityError> {
        PrsParams::new(raw.beta, raw.t_min)
    }
}

impl From<PrsParams> for RawPrs {
    fn from(p: PrsParams) -> Self {
        RawPrs { beta: p.beta, t_min: p.t_min }
    }
}

impl PrsParams {
    pub fn new(beta: f64, t_min: f64) -> Result<Self, QualityError> {
        if !(t_min > 0.0 && beta.is_finite() && t_min < beta) {
            return Err(QualityError::PrsParams { beta, t_min });
        }
        Ok(PrsParams { beta, t_min })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }
}

impl Default for PrsParams {
    fn default() -> Self {
        PrsParams { beta: 30.0, t_min: 1.0 }
    }
}

/// `beta / max(t, t_min)`: 1.0 for an answer exactly at the best waiting
/// factor, above 1 when faster, below 1 when slower.
pub fn personal_response_time(p: &PrsParams, t: f64) -> Result<f64, QualityError> {
    if !(t > 0.0) {
        return Err(QualityError::NonPositiveTime(t));
    }
    Ok(p.beta / t.max(p.t_min))
}

/// Distance of an answer time from the best waiting factor, `|beta - t|`.
pub fn delta_to_beta(p: &PrsParams, t: f64) -> Result<f64, QualityError> {
    if !(t > 0.0) {
        return Err(QualityError::NonPositiveTime(t));
    }
    Ok((p.beta - t).abs())
}

/// Per-task-type best waiting factors over a shared default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrsTable {
    #[serde(default)]
    pub default: PrsParams,
    #[serde(default)]
    pub per_type: BTreeMap<TaskTypeId, PrsParams>,
}

impl PrsTable {
    pub fn uniform(params: PrsParams) -> Self {
        PrsTable { default: params, per_type: BTreeMap::new() }
    }

    pub fn params_for(&self, task_type: TaskTypeId) -> &PrsParams {
        self.per_type.get(&task_type).unwrap_or(&self.default)
    }

    pub fn score(&self, task_type: TaskTypeId, t: f64) -> Result<f64, QualityError> {
        personal_response_time(self.params_for(task_type), t)
    }
}

/// Aggregated response time of one task: the summed response time of every
/// answer, with mean and max alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub total_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
    pub answers: usize,
}

pub fn aggregated_response_time(answers: &[Answer]) -> Result<ResponseSummary, QualityError> {
    if answers.is_empty() {
        return Err(QualityError::NoAnswers);
    }
    let mut total_s = 0.0;
    let mut max_s = f64::NEG_INFINITY;
    for a in answers {
        let t = a.response_time();
        total_s += t;
        max_s = max_s.max(t);
    }
    Ok(ResponseSummary { total_s, mean_s: total_s / answers.len() as f64, max_s, answers: answers.len() })
}
