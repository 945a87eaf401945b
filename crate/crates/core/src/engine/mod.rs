//! End-to-end scenario simulation.
//!
//! [`simulate`] builds the world, generates tasks, and walks them in arrival
//! order: mobility is stepped to each arrival, the task is dispatched
//! (ranked fanout, or a geofenced broadcast for emergencies), and every
//! delivered assignment is answered according to the worker's behaviour.
//! Profiles absorb each answer as it is graded. The task stream can be split
//! into rounds, after each of which (location class, task type) efficiency is
//! relearned and optionally fed back into ranking.
//!
//! [`aggregate`] and [`run_metrics`] turn a finished run into aggregation
//! reports and benchmark figures.

mod evaluate;
mod tasks;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{
    dispatch_task, emergency_broadcast, inside_geofence, Assignment, Dispatch, DispatchError, DispatchPolicy,
    NetworkModel, RankingPrior,
};
use crate::domain::{
    DomainError, GeoPoint, LocationClassId, LocationIndex, Place, PlaceId, Task, TaskKind, TaskTypeId, Taxonomy,
    WorkerId, OPEN_AREA,
};
use crate::geolearn::{
    inefficient_pairs, learn_efficiency, verdict_churn, EfficiencyPair, GeoError, GeolearnParams, Observation,
};
use crate::quality::{AggregationMethod, Answer, EmParams, GamificationParams, PrsTable, QualityError};
use crate::rng::{stream, Stream};
use crate::world::{generate_world, ActivityRecord, World, WorldConfig, WorldError};

pub use evaluate::{aggregate, gamification, observations, run_metrics, truth_map, EmergencyOutcome, RunMetrics};
pub use tasks::{generate_tasks, TaskCount, TaskGenConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// What emergency tasks are sent through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmergencyMode {
    /// Everyone inside the geofence.
    #[default]
    Broadcast,
    /// The same ranked fanout as normal tasks.
    Ranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchConfig {
    #[serde(default)]
    pub policy: DispatchPolicy,
    /// Workers asked per question.
    #[serde(default = "default_fanout")]
    pub fanout: usize,
    #[serde(default)]
    pub emergency: EmergencyMode,
    /// Most assignments any one worker receives over the run.
    #[serde(default)]
    pub capacity: Option<u32>,
    #[serde(default = "default_emergency_max")]
    pub emergency_max_radius_m: f64,
}

fn default_fanout() -> usize {
    5
}

fn default_emergency_max() -> f64 {
    5000.0
}

impl Default for DispatchConfig {
    fn default() -> Self {
        DispatchConfig {
            policy: DispatchPolicy::default(),
            fanout: default_fanout(),
            emergency: EmergencyMode::default(),
            capacity: None,
            emergency_max_radius_m: default_emergency_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    #[serde(default)]
    pub prs: PrsTable,
    /// Vote share a label needs to enter a multi-label estimate.
    #[serde(default = "default_theta")]
    pub multilabel_threshold: f64,
    #[serde(default)]
    pub em: EmParams,
    #[serde(default = "default_w_min")]
    pub w_min: f64,
    #[serde(default)]
    pub gamification: GamificationParams,
    #[serde(default = "all_methods")]
    pub methods: Vec<AggregationMethod>,
}

fn default_theta() -> f64 {
    0.5
}

fn default_w_min() -> f64 {
    0.1
}

fn all_methods() -> Vec<AggregationMethod> {
    AggregationMethod::ALL.to_vec()
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            prs: PrsTable::default(),
            multilabel_threshold: default_theta(),
            em: EmParams::default(),
            w_min: default_w_min(),
            gamification: GamificationParams::default(),
            methods: all_methods(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeolearnConfig {
    #[serde(default)]
    pub params: GeolearnParams,
    /// The task stream is split into this many consecutive rounds.
    #[serde(default = "one_round")]
    pub rounds: usize,
    /// Ranking penalty for pairs the previous round judged inefficient;
    /// 0 disables the feedback.
    #[serde(default)]
    pub prior_weight: f64,
}

fn one_round() -> usize {
    1
}

impl Default for GeolearnConfig {
    fn default() -> Self {
        GeolearnConfig { params: GeolearnParams::default(), rounds: one_round(), prior_weight: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub world: WorldConfig,
    pub tasks: TaskGenConfig,
    #[serde(default)]
    pub dispatch: DispatchConfig,
    #[serde(default)]
    pub network: NetworkModel,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default)]
    pub geolearn: GeolearnConfig,
    pub seed: u64,
    /// Tasks arrive uniformly over `[0, duration_s)`.
    pub duration_s: f64,
}

impl ScenarioConfig {
    pub fn new(world: WorldConfig, tasks: TaskGenConfig, seed: u64) -> Self {
        ScenarioConfig {
            world,
            tasks,
            dispatch: DispatchConfig::default(),
            network: NetworkModel::default(),
            quality: QualityConfig::default(),
            geolearn: GeolearnConfig::default(),
            seed,
            duration_s: 3600.0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m| Err(EngineError::InvalidConfig(m));
        self.world.validate()?;
        self.tasks.validate(&self.world.taxonomy, &self.world.places, self.dispatch.emergency_max_radius_m)?;
        if self.dispatch.fanout == 0 {
            return Err(DispatchError::Fanout.into());
        }
        if let DispatchPolicy::Ranked { weights } = &self.dispatch.policy {
            weights.validate()?;
        }
        if self.dispatch.capacity == Some(0) {
            return bad("capacity must be at least 1");
        }
        self.network.validate()?;
        let q = &self.quality;
        if !(q.multilabel_threshold > 0.0 && q.multilabel_threshold <= 1.0) {
            return Err(QualityError::Threshold(q.multilabel_threshold).into());
        }
        if q.em.max_iters == 0 || !(q.em.tol > 0.0) {
            return Err(QualityError::EmParams.into());
        }
        if !(q.w_min > 0.0 && q.w_min < 1.0) {
            return Err(QualityError::WeightFloor(q.w_min).into());
        }
        q.gamification.validate()?;
        if q.methods.is_empty() {
            return bad("at least one aggregation method is required");
        }
        let g = &self.geolearn;
        g.params.thresholds.validate()?;
        if g.params.cluster.k < 2 {
            return Err(GeoError::K.into());
        }
        if g.rounds == 0 {
            return bad("geolearn rounds must be at least 1");
        }
        if !(g.prior_weight >= 0.0 && g.prior_weight.is_finite()) {
            return bad("prior_weight must be non-negative");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        Ok(())
    }
}

/// One dispatch attempt together with the context it happened in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub assignment: Assignment,
    /// Worker's location class at dispatch.
    pub location_class: LocationClassId,
    pub task_type: TaskTypeId,
}

/// A submitted answer, graded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub answer: Answer,
    pub location_class: LocationClassId,
    pub task_type: TaskTypeId,
    /// Response time `sent_at - read_at` as drawn, in seconds.
    pub t: f64,
    pub prs: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub tasks: usize,
    /// Verdicts learned from every observation up to the end of the round.
    pub pairs: Vec<EfficiencyPair>,
    /// Pairs that are new or changed verdict since the last learned round.
    pub churn: usize,
    /// Why nothing could be learned this round.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    /// The world as it stands after the last task.
    pub world: World,
    pub tasks: Vec<Task>,
    pub deliveries: Vec<DeliveryRecord>,
    pub answers: Vec<AnswerRecord>,
    pub rounds: Vec<RoundReport>,
    pub emergencies: Vec<EmergencyOutcome>,
}

impl SimulationRun {
    /// Verdicts of the last round that learned anything.
    pub fn efficiency_pairs(&self) -> &[EfficiencyPair] {
        self.rounds.iter().rev().find(|r| r.error.is_none()).map_or(&[], |r| &r.pairs)
    }
}

/// Runs one scenario. Deterministic in `config`.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulationRun, EngineError> {
    config.validate()?;
    let mut world = generate_world(&config.world, config.seed)?;
    world.rescore_profiles(&config.quality.prs)?;
    let taxonomy = world.taxonomy.clone();
    let tasks = generate_tasks(
        &config.tasks,
        &world.taxonomy,
        &world.index,
        config.duration_s,
        config.dispatch.emergency_max_radius_m,
        &mut stream(config.seed, Stream::Tasks),
    )?;
    let mut dispatch_rng = stream(config.seed, Stream::Dispatch);
    let mut answer_rng = stream(config.seed, Stream::Answers);

    let mut load = alloc::vec![0u32; world.workers.len()];
    let mut deliveries = Vec::new();
    let mut answers = Vec::new();
    let mut emergencies = Vec::new();
    let mut observations = Vec::new();
    let mut rounds = Vec::new();
    let mut prior: Option<RankingPrior> = None;
    let mut last_pairs: Vec<EfficiencyPair> = Vec::new();

    let chunk = tasks.len().div_ceil(config.geolearn.rounds).max(1);
    for (round, batch) in tasks.chunks(chunk).enumerate() {
        for task in batch {
            world.step_mobility(task.created_at)?;
            let d = dispatch_one(config, &world, task, &load, prior.as_ref(), &mut dispatch_rng)?;
            let inside = (task.kind == TaskKind::Emergency).then(|| inside_geofence(task, &world.workers));
            let first_answer = answers.len();

            for a in &d.assignments {
                load[a.worker.0 as usize] += 1;
                let w = &world.workers[a.worker.0 as usize];
                let class = w.location.class;
                deliveries.push(DeliveryRecord {
                    assignment: a.clone(),
                    location_class: class,
                    task_type: task.task_type,
                });
                if !a.delivered() {
                    continue;
                }
                let question = task.questions.iter().find(|q| q.id == a.question).expect("assignment of this task");
                let mut obs =
                    Observation { class, task_type: task.task_type, answered: false, correct: false, prs: 0.0 };
                let effect = world.effect(class);
                let ignored = answer_rng.random_bool(effect.ignore_prob);
                let declined = !ignored && question.multi_label && {
                    world.workers[a.worker.0 as usize].offer_multi_label(&taxonomy, world.profile_smoothing);
                    answer_rng.random_bool(world.workers[a.worker.0 as usize].multilabel_decline)
                };
                if ignored || declined {
                    observations.push(obs);
                    continue;
                }
                let w = &world.workers[a.worker.0 as usize];
                let labels = w.draw_labels(question, task.task_type, &effect, &mut answer_rng);
                let t = w.draw_response_time(&world.response, &effect, &mut answer_rng);
                let prs = config.quality.prs.score(task.task_type, t)?;
                let correct = labels == question.ground_truth;
                let read_at = a.dispatched_at + config.network.latency_s;
                let record = ActivityRecord {
                    task: task.id,
                    task_type: task.task_type,
                    class,
                    t,
                    correct,
                    multi_label: question.multi_label,
                    timestamp: a.dispatched_at,
                };
                let alpha = world.profile_smoothing;
                world.workers[a.worker.0 as usize].absorb(record, &config.quality.prs, &taxonomy, alpha)?;
                obs.answered = true;
                obs.correct = correct;
                obs.prs = prs;
                observations.push(obs);
                answers.push(AnswerRecord {
                    answer: Answer {
                        task: task.id,
                        question: question.id,
                        worker: a.worker,
                        labels,
                        read_at,
                        sent_at: read_at + t,
                    },
                    location_class: class,
                    task_type: task.task_type,
                    t,
                    prs,
                    correct,
                });
            }

            if let Some(inside) = inside {
                let reached: BTreeSet<WorkerId> =
                    d.assignments.iter().filter(|a| a.delivered()).map(|a| a.worker).collect();
                let inside_set: BTreeSet<WorkerId> = inside.iter().copied().collect();
                let covered = reached.intersection(&inside_set).count();
                let first = answers[first_answer..]
                    .iter()
                    .map(|r| r.answer.sent_at - task.created_at)
                    .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
                emergencies.push(EmergencyOutcome {
                    task: task.id,
                    inside: inside.len(),
                    covered,
                    coverage: if inside.is_empty() { 0.0 } else { covered as f64 / inside.len() as f64 },
                    time_to_first_answer_s: first,
                    empty_geofence: inside.is_empty(),
                });
            }
        }

        let report = match learn_efficiency(&observations, &config.geolearn.params) {
            Ok(out) => {
                let churn = verdict_churn(&last_pairs, &out.pairs);
                if config.geolearn.prior_weight > 0.0 {
                    prior = Some(RankingPrior {
                        weight: config.geolearn.prior_weight,
                        inefficient: inefficient_pairs(&out.pairs),
                    });
                }
                last_pairs = out.pairs.clone();
                RoundReport { round, tasks: batch.len(), pairs: out.pairs, churn, error: None }
            }
            Err(e) => {
                RoundReport { round, tasks: batch.len(), pairs: Vec::new(), churn: 0, error: Some(e.to_string()) }
            }
        };
        rounds.push(report);
    }

    Ok(SimulationRun { world, tasks, deliveries, answers, rounds, emergencies })
}

fn dispatch_one<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    world: &World,
    task: &Task,
    load: &[u32],
    prior: Option<&RankingPrior>,
    rng: &mut R,
) -> Result<Dispatch, EngineError> {
    let net = &config.network;
    if task.kind == TaskKind::Emergency && config.dispatch.emergency == EmergencyMode::Broadcast {
        return Ok(emergency_broadcast(task, &world.workers, net, task.created_at, rng)?);
    }
    let need = task.questions.len() as u32;
    let candidates: Vec<_> = world
        .workers
        .iter()
        .filter(|w| config.dispatch.capacity.is_none_or(|cap| load[w.id.0 as usize] + need <= cap))
        .collect();
    if candidates.is_empty() {
        return Ok(Dispatch::default());
    }
    Ok(dispatch_task(
        task,
        &candidates,
        &config.dispatch.policy,
        prior,
        net,
        config.dispatch.fanout,
        task.created_at,
        rng,
    )?)
}

/// A square grid of places around `center`, cycling through every class of
/// the taxonomy except open area, `per_class` places each.
pub fn city_grid(
    taxonomy: &Taxonomy,
    center: GeoPoint,
    per_class: usize,
    spacing_m: f64,
    radius_m: f64,
) -> Result<LocationIndex, DomainError> {
    let classes: Vec<_> = taxonomy.classes().iter().filter(|c| c.id != OPEN_AREA).collect();
    let total = classes.len() * per_class;
    let side = libm::ceil(libm::sqrt(total as f64)) as usize;
    let half = (side as f64 - 1.0) / 2.0;
    let places = (0..total)
        .map(|i| {
            let class = classes[i % classes.len()];
            let (row, col) = ((i / side.max(1)) as f64, (i % side.max(1)) as f64);
            let mut name = class.name.clone();
            name.push(' ');
            name.push_str(&(i / classes.len()).to_string());
            Place {
                id: PlaceId(i as u32),
                name,
                point: center.offset((row - half) * spacing_m, (col - half) * spacing_m),
                class: class.id,
                variant: None,
                radius_m,
            }
        })
        .collect();
    LocationIndex::new(places, OPEN_AREA)
}
