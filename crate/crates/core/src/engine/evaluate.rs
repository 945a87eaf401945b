use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AnswerRecord, DeliveryRecord, EngineError, QualityConfig, SimulationRun};
use crate::dispatch::{network_metrics, network_metrics_by_task, DeliveryEvent, NetworkMetrics};
use crate::domain::{classify_location, Label, QuestionId, Task, TaskId, WorkerId};
use crate::geolearn::Observation;
use crate::quality::{
    accuracy, aggregated_response_time, credibility_weight, em_aggregate, gamification_score, majority_vote,
    multilabel_aggregate, rank_scores, weighted_majority, weighted_multilabel_aggregate, AggregationMethod,
    AggregationReport, Answer, EmQuestion, GamificationScore, ResponseSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergencyOutcome {
    pub task: TaskId,
    /// Workers inside the geofence at arrival.
    pub inside: usize,
    /// Of those, how many received the task.
    pub covered: usize,
    /// `covered / inside`, 0 for an empty geofence.
    pub coverage: f64,
    /// First answer's `sent_at` minus the task's arrival.
    pub time_to_first_answer_s: Option<f64>,
    pub empty_geofence: bool,
}

/// Ground truth of every question.
pub fn truth_map(tasks: &[Task]) -> BTreeMap<QuestionId, BTreeSet<Label>> {
    tasks.iter().flat_map(|t| t.questions.iter().map(|q| (q.id, q.ground_truth.clone()))).collect()
}

/// Observations in delivery order: one per delivered assignment, answered
/// when a matching answer exists.
pub fn observations(deliveries: &[DeliveryRecord], answers: &[AnswerRecord]) -> Vec<Observation> {
    let by_key: BTreeMap<(QuestionId, WorkerId), &AnswerRecord> =
        answers.iter().map(|a| ((a.answer.question, a.answer.worker), a)).collect();
    deliveries
        .iter()
        .filter(|d| d.assignment.delivered())
        .map(|d| {
            let a = by_key.get(&(d.assignment.question, d.assignment.worker));
            Observation {
                class: d.location_class,
                task_type: d.task_type,
                answered: a.is_some(),
                correct: a.is_some_and(|a| a.correct),
                prs: a.map_or(0.0, |a| a.prs),
            }
        })
        .collect()
}

/// Estimates every question of the run with one method. Questions nobody
/// answered get an empty estimate and count as wrong. `compute_seconds` is
/// left at 0 for the caller to fill.
pub fn aggregate(
    run: &SimulationRun,
    method: AggregationMethod,
    quality: &QualityConfig,
) -> Result<AggregationReport, EngineError> {
    let theta = quality.multilabel_threshold;
    let mut per_question: BTreeMap<QuestionId, Vec<&Answer>> = BTreeMap::new();
    for r in &run.answers {
        per_question.entry(r.answer.question).or_default().push(&r.answer);
    }
    let mut estimated: BTreeMap<QuestionId, BTreeSet<Label>> = BTreeMap::new();
    let mut iterations = 0;

    // Single-label questions gathered for EM, in question order.
    let mut em_ids = Vec::new();
    let mut em_questions = Vec::new();

    for task in &run.tasks {
        let task_class = classify_location(task.context.center, &run.world.index);
        for q in &task.questions {
            let Some(answers) = per_question.get(&q.id) else {
                estimated.insert(q.id, BTreeSet::new());
                continue;
            };
            let weight_of = |w: WorkerId| -> Result<f64, EngineError> {
                let profile = &run.world.worker(w).expect("answer from a known worker").profile;
                Ok(credibility_weight(w, profile, task_class, quality.w_min)?.weight)
            };
            let est = match (method, q.multi_label) {
                (AggregationMethod::WeightedMajority, true) => {
                    let weighted = answers.iter().map(|a| Ok((weight_of(a.worker)?, &a.labels))).collect::<Result<
                        Vec<_>,
                        EngineError,
                    >>(
                    )?;
                    weighted_multilabel_aggregate(&weighted, &q.candidates, theta)?
                }
                (_, true) => {
                    let sets: Vec<BTreeSet<Label>> = answers.iter().map(|a| a.labels.clone()).collect();
                    multilabel_aggregate(&sets, &q.candidates, theta)?
                }
                (AggregationMethod::MajorityVote, false) => {
                    let votes: Vec<Label> = answers.iter().map(|a| single(a)).collect();
                    BTreeSet::from([majority_vote(&votes)?])
                }
                (AggregationMethod::WeightedMajority, false) => {
                    let votes: Vec<(WorkerId, Label)> = answers.iter().map(|a| (a.worker, single(a))).collect();
                    let weights = votes
                        .iter()
                        .map(|&(w, _)| Ok((w, weight_of(w)?)))
                        .collect::<Result<BTreeMap<_, _>, EngineError>>()?;
                    BTreeSet::from([weighted_majority(&votes, &weights)?])
                }
                (AggregationMethod::Em, false) => {
                    em_ids.push(q.id);
                    em_questions.push(EmQuestion {
                        candidates: q.candidates.clone(),
                        votes: answers.iter().map(|a| (a.worker, single(a))).collect(),
                    });
                    continue;
                }
            };
            estimated.insert(q.id, est);
        }
    }

    if !em_questions.is_empty() {
        let out = em_aggregate(&em_questions, quality.em)?;
        iterations = out.iterations;
        for (id, l) in em_ids.into_iter().zip(out.labels) {
            estimated.insert(id, BTreeSet::from([l]));
        }
    }

    let truth = truth_map(&run.tasks);
    let accuracy = if truth.is_empty() { None } else { Some(accuracy(&estimated, &truth)?) };
    Ok(AggregationReport { method: method.name().to_string(), estimated, accuracy, iterations, compute_seconds: 0.0 })
}

fn single(a: &Answer) -> Label {
    *a.labels.iter().next().expect("answers carry at least one label")
}

/// Benchmark figures of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub tasks: usize,
    pub questions: usize,
    pub answered_questions: usize,
    pub answers: usize,
    /// `None` when nothing was dispatched.
    pub network: Option<NetworkMetrics>,
    pub network_by_task: BTreeMap<TaskId, NetworkMetrics>,
    /// Aggregated response time of each task with at least one answer.
    pub arst: BTreeMap<TaskId, ResponseSummary>,
    pub mean_response_s: Option<f64>,
    pub mean_prs: Option<f64>,
}

pub fn run_metrics(run: &SimulationRun) -> RunMetrics {
    let events: Vec<DeliveryEvent> = run.deliveries.iter().map(|d| d.assignment.event()).collect();
    let mut per_task: BTreeMap<TaskId, Vec<Answer>> = BTreeMap::new();
    for r in &run.answers {
        per_task.entry(r.answer.task).or_default().push(r.answer.clone());
    }
    let arst =
        per_task.iter().map(|(t, a)| (*t, aggregated_response_time(a).expect("non-empty by construction"))).collect();
    let answered: BTreeSet<QuestionId> = run.answers.iter().map(|r| r.answer.question).collect();
    let n = run.answers.len();
    let mean = |f: fn(&AnswerRecord) -> f64| (n > 0).then(|| run.answers.iter().map(f).sum::<f64>() / n as f64);
    RunMetrics {
        tasks: run.tasks.len(),
        questions: run.tasks.iter().map(|t| t.questions.len()).sum(),
        answered_questions: answered.len(),
        answers: n,
        network: network_metrics(&events).ok(),
        network_by_task: network_metrics_by_task(&events),
        arst,
        mean_response_s: mean(|r| r.t),
        mean_prs: mean(|r| r.prs),
    }
}

/// Leaderboard of every worker at `now`.
pub fn gamification(
    run: &SimulationRun,
    quality: &QualityConfig,
    now: f64,
) -> Result<Vec<GamificationScore>, EngineError> {
    let scores = run
        .world
        .workers
        .iter()
        .map(|w| Ok((w.id, gamification_score(&w.history, &quality.prs, &quality.gamification, now)?)))
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(rank_scores(&scores))
}
