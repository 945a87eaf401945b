//! Simulated delivery and the Av / Tu / FailR transport benchmarks.

use alloc::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::domain::{QuestionId, TaskId, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub availability_prob: f64,
    pub delivery_failure_prob: f64,
    pub per_message_overhead_bytes: u32,
    /// Seconds between dispatch and the worker reading the job.
    #[serde(default = "default_latency")]
    pub latency_s: f64,
}

fn default_latency() -> f64 {
    1.0
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel::perfect()
    }
}

impl NetworkModel {
    pub fn perfect() -> Self {
        NetworkModel {
            availability_prob: 1.0,
            delivery_failure_prob: 0.0,
            per_message_overhead_bytes: 0,
            latency_s: default_latency(),
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if unit(self.availability_prob)
            && unit(self.delivery_failure_prob)
            && self.latency_s >= 0.0
            && self.latency_s.is_finite()
        {
            Ok(())
        } else {
            Err(DispatchError::Network)
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DeliveryOutcome {
        if !rng.random_bool(self.availability_prob) {
            DeliveryOutcome::Unreachable
        } else if rng.random_bool(self.delivery_failure_prob) {
            DeliveryOutcome::Failed
        } else {
            DeliveryOutcome::Delivered
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryOutcome {
    Delivered,
    /// The worker was reachable but the message was lost.
    Failed,
    /// The worker's device was not available.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub task: TaskId,
    pub question: QuestionId,
    pub worker: WorkerId,
    pub dispatched_at: f64,
    pub outcome: DeliveryOutcome,
    pub payload_bytes: u64,
}

impl Assignment {
    /// Only delivered assignments may be answered.
    pub fn delivered(&self) -> bool {
        self.outcome == DeliveryOutcome::Delivered
    }

    pub fn event(&self) -> DeliveryEvent {
        DeliveryEvent {
            task: self.task,
            question: self.question,
            worker: self.worker,
            outcome: self.outcome,
            bytes: self.payload_bytes,
            timestamp: self.dispatched_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryEvent {
    pub task: TaskId,
    pub question: QuestionId,
    pub worker: WorkerId,
    pub outcome: DeliveryOutcome,
    pub bytes: u64,
    pub timestamp: f64,
}

/// Transport benchmarks over a set of delivery attempts.
///
/// `failed` counts messages lost on the way to reachable workers; FailR
/// counts every attempt that did not arrive, unreachable ones included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub attempted: u64,
    pub reachable: u64,
    pub delivered: u64,
    pub failed: u64,
    pub unreachable: u64,
    /// Availability of clients: reachable / attempted.
    pub av: f64,
    /// Transfer usage: mean bytes per delivered message (0 if none).
    pub tu: f64,
    /// Failure rate: (failed + unreachable) / attempted.
    pub fail_r: f64,
}

#[derive(Default)]
struct Counts {
    attempted: u64,
    delivered: u64,
    failed: u64,
    unreachable: u64,
    delivered_bytes: u64,
}

impl Counts {
    fn add(&mut self, e: &DeliveryEvent) {
        self.attempted += 1;
        match e.outcome {
            DeliveryOutcome::Delivered => {
                self.delivered += 1;
                self.delivered_bytes += e.bytes;
            }
            DeliveryOutcome::Failed => self.failed += 1,
            DeliveryOutcome::Unreachable => self.unreachable += 1,
        }
    }

    fn metrics(&self) -> NetworkMetrics {
        let n = self.attempted as f64;
        NetworkMetrics {
            attempted: self.attempted,
            reachable: self.attempted - self.unreachable,
            delivered: self.delivered,
            failed: self.failed,
            unreachable: self.unreachable,
            av: (self.attempted - self.unreachable) as f64 / n,
            tu: if self.delivered > 0 { self.delivered_bytes as f64 / self.delivered as f64 } else { 0.0 },
            fail_r: (self.failed + self.unreachable) as f64 / n,
        }
    }
}

pub fn network_metrics<'a, I>(events: I) -> Result<NetworkMetrics, DispatchError>
where
    I: IntoIterator<Item = &'a DeliveryEvent>,
{
    let mut c = Counts::default();
    for e in events {
        c.add(e);
    }
    if c.attempted == 0 {
        return Err(DispatchError::NoEvents);
    }
    Ok(c.metrics())
}

/// [`network_metrics`] for each task separately.
pub fn network_metrics_by_task<'a, I>(events: I) -> BTreeMap<TaskId, NetworkMetrics>
where
    I: IntoIterator<Item = &'a DeliveryEvent>,
{
    let mut per: BTreeMap<TaskId, Counts> = BTreeMap::new();
    for e in events {
        per.entry(e.task).or_default().add(e);
    }
    per.into_iter().map(|(t, c)| (t, c.metrics())).collect()
}
