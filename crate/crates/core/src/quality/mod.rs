//! Quality model: response-time scores, answer aggregation, accuracy,
//! credibility weights and gamification.

mod em;
mod incentive;
mod response;
mod vote;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Label, QuestionId, TaskId, WorkerId};

pub use em::{em_aggregate, EmOutcome, EmParams, EmQuestion};
pub use incentive::{
    credibility_weight, gamification_score, rank_scores, CredibilityWeight, GamificationParams, GamificationScore,
};
pub use response::{
    aggregated_response_time, delta_to_beta, personal_response_time, PrsParams, PrsTable, ResponseSummary,
};
pub use vote::{accuracy, majority_vote, multilabel_aggregate, weighted_majority, weighted_multilabel_aggregate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("response time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid PRS parameters: beta {beta}, t_min {t_min} (need 0 < t_min < beta)")]
    PrsParams { beta: f64, t_min: f64 },
    #[error("no answers to aggregate")]
    NoAnswers,
    #[error("no weight for worker {0}")]
    MissingWeight(WorkerId),
    #[error("answer matrix is empty")]
    EmptyMatrix,
    #[error("EM needs max_iters >= 1 and tol > 0")]
    EmParams,
    #[error("label {0} is not a candidate of its question")]
    NotCandidate(Label),
    #[error("threshold {0} outside (0, 1]")]
    Threshold(f64),
    #[error("accuracy needs at least one question")]
    EmptyInput,
    #[error("estimated and true label maps cover different questions")]
    KeyMismatch,
    #[error("credibility floor {0} outside (0, 1)")]
    WeightFloor(f64),
    #[error("gamification needs half_life > 0 and non-negative weights summing to 1")]
    Gamification,
}

/// A worker's reply to one assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub task: TaskId,
    pub question: QuestionId,
    pub worker: WorkerId,
    /// Exactly one label unless the question is multi-label.
    pub labels: BTreeSet<Label>,
    pub read_at: f64,
    pub sent_at: f64,
}

impl Answer {
    /// Seconds between reading the job and sending the answer.
    pub fn response_time(&self) -> f64 {
        self.sent_at - self.read_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    MajorityVote,
    WeightedMajority,
    Em,
}

impl AggregationMethod {
    pub const ALL: [AggregationMethod; 3] =
        [AggregationMethod::MajorityVote, AggregationMethod::WeightedMajority, AggregationMethod::Em];

    pub fn name(self) -> &'static str {
        match self {
            AggregationMethod::MajorityVote => "majority_vote",
            AggregationMethod::WeightedMajority => "weighted_majority",
            AggregationMethod::Em => "em",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, AggregationMethod::Em)
    }
}

impl fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one aggregation method over every question of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub method: String,
    /// Unanswered questions map to an empty set.
    pub estimated: BTreeMap<QuestionId, BTreeSet<Label>>,
    /// `None` when no ground truth was available.
    pub accuracy: Option<f64>,
    /// Zero for non-iterative methods.
    pub iterations: usize,
    pub compute_seconds: f64,
}
