//! Matching tasks to workers and pushing assignments over the network.

mod network;

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{haversine_distance, LocationClassId, Task, TaskKind, TaskTypeId, WorkerId};
use crate::world::Worker;

pub use network::{
    network_metrics, network_metrics_by_task, Assignment, DeliveryEvent, DeliveryOutcome, NetworkMetrics, NetworkModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("no workers to dispatch to")]
    NoWorkers,
    #[error("task {0} is not an emergency task")]
    NotEmergency(crate::domain::TaskId),
    #[error("fanout must be at least 1")]
    Fanout,
    #[error("context weights must be non-negative with a positive sum")]
    Weights,
    #[error("network probabilities must lie in [0, 1]")]
    Network,
    #[error("no delivery events")]
    NoEvents,
}

/// Relative importance of the three mismatch terms of [`context_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextWeights {
    pub w_geo: f64,
    pub w_class: f64,
    pub w_skill: f64,
}

impl ContextWeights {
    pub fn new(w_geo: f64, w_class: f64, w_skill: f64) -> Result<Self, DispatchError> {
        let w = ContextWeights { w_geo, w_class, w_skill };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let all = [self.w_geo, self.w_class, self.w_skill];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) && all.iter().sum::<f64>() > 0.0 {
            Ok(())
        } else {
            Err(DispatchError::Weights)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        ContextWeights { w_geo: self.w_geo * c, w_class: self.w_class * c, w_skill: self.w_skill * c }
    }
}

impl Default for ContextWeights {
    fn default() -> Self {
        ContextWeights { w_geo: 1.0, w_class: 1.0, w_skill: 1.0 }
    }
}

/// Weighted mismatch between a worker's current context and a task's.
///
/// Each term lies in `[0, 1]` before weighting: distance to the task center
/// as a fraction of the radius (capped at 1), whether the worker's location
/// class is inadmissible, and one minus the worker's profiled skill for the
/// task type.
pub fn context_distance(worker: &Worker, task: &Task, w: &ContextWeights) -> f64 {
    let ctx = &task.context;
    let geo = (haversine_distance(worker.location.point, ctx.center) / ctx.radius_m).min(1.0);
    let class = if ctx.admits(worker.location.class) { 0.0 } else { 1.0 };
    let skill = 1.0 - worker.profile.skill_for(task.task_type).clamp(0.0, 1.0);
    w.w_geo * geo + w.w_class * class + w.w_skill * skill
}

/// Learned (location class, task type) pairs to steer away from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankingPrior {
    pub weight: f64,
    pub inefficient: BTreeSet<(LocationClassId, TaskTypeId)>,
}

impl RankingPrior {
    fn penalty(&self, class: LocationClassId, task_type: TaskTypeId) -> f64 {
        if self.inefficient.contains(&(class, task_type)) {
            self.weight
        } else {
            0.0
        }
    }
}

/// Workers in ascending context distance (plus the prior's penalty, if
/// any), ties by id, truncated to `limit`.
pub fn rank_candidates<'a, I>(
    task: &Task,
    workers: I,
    w: &ContextWeights,
    limit: usize,
    prior: Option<&RankingPrior>,
) -> Result<Vec<WorkerId>, DispatchError>
where
    I: IntoIterator<Item = &'a Worker>,
{
    w.validate()?;
    let mut scored: Vec<(f64, WorkerId)> = workers
        .into_iter()
        .map(|wk| {
            let extra = prior.map_or(0.0, |p| p.penalty(wk.location.class, task.task_type));
            (context_distance(wk, task, w) + extra, wk.id)
        })
        .collect();
    if scored.is_empty() {
        return Err(DispatchError::NoWorkers);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(limit);
    Ok(scored.into_iter().map(|(_, id)| id).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DispatchPolicy {
    /// Lowest context distance first.
    Ranked { weights: ContextWeights },
    /// Uniformly random workers, ignoring context.
    Random,
}

impl Default for DispatchPolicy {
    fn default() -> Self {
        DispatchPolicy::Ranked { weights: ContextWeights::default() }
    }
}

/// Assignments of one dispatch round and the matching delivery events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dispatch {
    pub assignments: Vec<Assignment>,
    pub events: Vec<DeliveryEvent>,
}

impl Dispatch {
    pub fn targeted_workers(&self) -> BTreeSet<WorkerId> {
        self.assignments.iter().map(|a| a.worker).collect()
    }
}

fn deliver<R: Rng + ?Sized>(task: &Task, targets: &[WorkerId], net: &NetworkModel, now: f64, rng: &mut R) -> Dispatch {
    let mut out = Dispatch::default();
    let bytes = task.payload_bytes as u64 + net.per_message_overhead_bytes as u64;
    for &worker in targets {
        for q in &task.questions {
            let outcome = net.draw(rng);
            let a =
                Assignment { task: task.id, question: q.id, worker, dispatched_at: now, outcome, payload_bytes: bytes };
            out.events.push(a.event());
            out.assignments.push(a);
        }
    }
    out
}

/// Sends every question of `task` to `fanout` workers chosen by `policy`.
///
/// Each assignment independently finds its worker unreachable with
/// probability `1 - availability_prob`, otherwise fails in transit with
/// probability `delivery_failure_prob`, otherwise arrives.
#[allow(clippy::too_many_arguments)]
pub fn dispatch_task<R: Rng + ?Sized>(
    task: &Task,
    candidates: &[&Worker],
    policy: &DispatchPolicy,
    prior: Option<&RankingPrior>,
    net: &NetworkModel,
    fanout: usize,
    now: f64,
    rng: &mut R,
) -> Result<Dispatch, DispatchError> {
    if fanout == 0 {
        return Err(DispatchError::Fanout);
    }
    net.validate()?;
    if candidates.is_empty() {
        return Err(DispatchError::NoWorkers);
    }
    let targets: Vec<WorkerId> = match policy {
        DispatchPolicy::Ranked { weights } => {
            rank_candidates(task, candidates.iter().copied(), weights, fanout, prior)?
        }
        DispatchPolicy::Random => {
            let k = fanout.min(candidates.len());
            sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i].id).collect()
        }
    };
    Ok(deliver(task, &targets, net, now, rng))
}

/// Sends an emergency task to everyone inside its geofence, in id order,
/// without consulting profiles.
pub fn emergency_broadcast<R: Rng + ?Sized>(
    task: &Task,
    workers: &[Worker],
    net: &NetworkModel,
    now: f64,
    rng: &mut R,
) -> Result<Dispatch, DispatchError> {
    if task.kind != TaskKind::Emergency {
        return Err(DispatchError::NotEmergency(task.id));
    }
    net.validate()?;
    let targets = inside_geofence(task, workers);
    Ok(deliver(task, &targets, net, now, rng))
}

/// Ids of the workers within the task radius of its center.
pub fn inside_geofence(task: &Task, workers: &[Worker]) -> Vec<WorkerId> {
    let mut ids: Vec<WorkerId> = workers
        .iter()
        .filter(|w| haversine_distance(w.location.point, task.context.center) <= task.context.radius_m)
        .map(|w| w.id)
        .collect();
    ids.sort_unstable();
    ids
}

#[cfg(test)]
mod tests;
