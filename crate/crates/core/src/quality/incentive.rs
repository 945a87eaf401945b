//! Credibility weights from mobility and the decaying gamification score.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{PrsTable, QualityError};
use crate::domain::{LocationClassId, WorkerId};
use crate::world::{ActivityHistory, WorkerProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibilityWeight {
    pub worker: WorkerId,
    pub weight: f64,
}

/// `w_min + (1 - w_min) * affinity`, where affinity is the share of the
/// worker's day spent in the task's location class.
pub fn credibility_weight(
    worker: WorkerId,
    profile: &WorkerProfile,
    task_class: LocationClassId,
    w_min: f64,
) -> Result<CredibilityWeight, QualityError> {
    if !(w_min > 0.0 && w_min < 1.0) {
        return Err(QualityError::WeightFloor(w_min));
    }
    let affinity = profile.class_affinity.get(&task_class).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(CredibilityWeight { worker, weight: w_min + (1.0 - w_min) * affinity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamificationParams {
    pub half_life_s: f64,
    pub w_acc: f64,
    pub w_eff: f64,
}

impl Default for GamificationParams {
    fn default() -> Self {
        GamificationParams { half_life_s: 86_400.0, w_acc: 0.5, w_eff: 0.5 }
    }
}

impl GamificationParams {
    pub fn validate(&self) -> Result<(), QualityError> {
        let ok = self.half_life_s > 0.0
            && self.w_acc >= 0.0
            && self.w_eff >= 0.0
            && (self.w_acc + self.w_eff - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(QualityError::Gamification)
        }
    }
}

/// Sum over answered records of `decay * (w_acc * correct + w_eff * min(1, PRS))`
/// with `decay = 2^(-age / half_life)`, age measured from `now`.
pub fn gamification_score(
    history: &ActivityHistory,
    prs: &PrsTable,
    params: &GamificationParams,
    now: f64,
) -> Result<f64, QualityError> {
    params.validate()?;
    let mut score = 0.0;
    for r in history.records() {
        let age = (now - r.timestamp).max(0.0);
        let decay = libm::exp2(-age / params.half_life_s);
        let eff = prs.score(r.task_type, r.t)?.min(1.0);
        let acc = if r.correct { 1.0 } else { 0.0 };
        score += decay * (params.w_acc * acc + params.w_eff * eff);
    }
    Ok(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamificationScore {
    pub worker: WorkerId,
    pub score: f64,
    /// 1-based position on the leaderboard.
    pub rank: usize,
}

/// Leaderboard by descending score; equal scores are ordered by worker id.
pub fn rank_scores(scores: &[(WorkerId, f64)]) -> Vec<GamificationScore> {
    let mut sorted: Vec<(WorkerId, f64)> = scores.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (worker, score))| GamificationScore { worker, score, rank: i + 1 })
        .collect()
}
