//! The synthetic population: workers, their mobility, behaviour and profiles.

mod mobility;
mod profile;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    classify_location, Label, LocationClassId, LocationIndex, Question, QuestionId, TaskId, TaskTypeId, Taxonomy,
    WorkerId, WorkerLocation,
};
use crate::quality::PrsTable;
use crate::rng::{stream, Stream};

pub use mobility::{DwellSegment, MobilitySchedule};
pub use profile::{
    build_profile, class_affinity, record_activity, ActivityHistory, ActivityRecord, ProfileStats, WorkerProfile,
};

/// Spammer ratios above this bound are rejected unless explicitly allowed.
pub const DEFAULT_MAX_SPAMMER_RATIO: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("world needs at least one worker and one place")]
    EmptyWorld,
    #[error("cannot step the clock back from {clock} to {to}")]
    ClockRegression { clock: f64, to: f64 },
    #[error("activity at {got} is older than the last record at {last}")]
    OutOfOrder { last: f64, got: f64 },
    #[error("response time must be positive, got {0}")]
    NonPositiveResponse(f64),
    #[error("smoothing pseudo-count must be positive, got {0}")]
    Smoothing(f64),
    #[error("invalid schedule: {0}")]
    Schedule(&'static str),
    #[error("invalid world config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Honest,
    /// Picks uniformly among the candidates.
    UniformSpammer,
    /// Always answers the candidate at this position (modulo arity).
    FixedAnswerSpammer {
        label_index: u16,
    },
    /// Honest, but every response takes `multiplier` times longer.
    Sloth {
        multiplier: f64,
    },
}

impl Strategy {
    pub fn is_spammer(&self) -> bool {
        matches!(self, Strategy::UniformSpammer | Strategy::FixedAnswerSpammer { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::UniformSpammer => "uniform_spammer",
            Strategy::FixedAnswerSpammer { .. } => "fixed_answer_spammer",
            Strategy::Sloth { .. } => "sloth",
        }
    }
}

/// How being in a location class changes behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassEffect {
    /// Multiplier on response time.
    #[serde(default = "one")]
    pub busyness: f64,
    /// Probability that an answer is a distracted uniform guess.
    #[serde(default)]
    pub accuracy_penalty: f64,
    /// Probability that a delivered assignment is ignored.
    #[serde(default)]
    pub ignore_prob: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ClassEffect {
    fn default() -> Self {
        ClassEffect { busyness: 1.0, accuracy_penalty: 0.0, ignore_prob: 0.0 }
    }
}

/// Log-normal response time before strategy and busyness multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub median_s: f64,
    pub sigma: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel { median_s: 20.0, sigma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReliabilityDist {
    Uniform {
        low: f64,
        high: f64,
    },
    /// `high` with probability `p_high`, else `low`.
    TwoPoint {
        p_high: f64,
        high: f64,
        low: f64,
    },
    /// Honest workers take these values in turn.
    Levels {
        values: Vec<f64>,
    },
}

impl Default for ReliabilityDist {
    fn default() -> Self {
        ReliabilityDist::Uniform { low: 0.7, high: 0.9 }
    }
}

/// Every worker excels at one task type (assigned round-robin) and is
/// mediocre at the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Specialization {
    pub matched: f64,
    pub other: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub day_s: f64,
    pub min_segments: usize,
    pub max_segments: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { day_s: 86_400.0, min_segments: 3, max_segments: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub taxonomy: Taxonomy,
    pub places: LocationIndex,
    pub n_workers: usize,
    #[serde(default)]
    pub spammer_ratio: f64,
    /// Lifts the default 0.4 cap on `spammer_ratio` up to 1.
    #[serde(default)]
    pub allow_extreme_spammer_ratio: bool,
    /// Share of spammers that always give the same answer; the rest guess.
    #[serde(default)]
    pub fixed_spammer_fraction: f64,
    #[serde(default)]
    pub fixed_spammer_label: u16,
    /// Share of honest workers who are slow.
    #[serde(default)]
    pub sloth_fraction: f64,
    #[serde(default = "default_sloth_range")]
    pub sloth_multiplier: (f64, f64),
    #[serde(default)]
    pub reliability: ReliabilityDist,
    #[serde(default)]
    pub specialization: Option<Specialization>,
    #[serde(default)]
    pub class_effects: BTreeMap<LocationClassId, ClassEffect>,
    #[serde(default)]
    pub response: ResponseModel,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Per-worker probability of declining a multi-label job, drawn uniformly.
    #[serde(default)]
    pub multilabel_decline: (f64, f64),
    /// Past gold answers per task type each worker starts with.
    #[serde(default)]
    pub warmup_records_per_type: u32,
    #[serde(default = "one")]
    pub profile_smoothing: f64,
}

fn default_sloth_range() -> (f64, f64) {
    (2.0, 4.0)
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl WorldConfig {
    /// A small world over the given places with otherwise default behaviour.
    pub fn new(taxonomy: Taxonomy, places: LocationIndex, n_workers: usize) -> Self {
        WorldConfig {
            taxonomy,
            places,
            n_workers,
            spammer_ratio: 0.0,
            allow_extreme_spammer_ratio: false,
            fixed_spammer_fraction: 0.0,
            fixed_spammer_label: 0,
            sloth_fraction: 0.0,
            sloth_multiplier: default_sloth_range(),
            reliability: ReliabilityDist::default(),
            specialization: None,
            class_effects: BTreeMap::new(),
            response: ResponseModel::default(),
            schedule: ScheduleConfig::default(),
            multilabel_decline: (0.0, 0.0),
            warmup_records_per_type: 0,
            profile_smoothing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.n_workers == 0 || self.places.places().is_empty() {
            return Err(WorldError::EmptyWorld);
        }
        let cap = if self.allow_extreme_spammer_ratio { 1.0 } else { DEFAULT_MAX_SPAMMER_RATIO };
        if !(self.spammer_ratio >= 0.0 && self.spammer_ratio <= cap) {
            return Err(WorldError::Config("spammer_ratio out of range"));
        }
        if !unit(self.fixed_spammer_fraction) || !unit(self.sloth_fraction) {
            return Err(WorldError::Config("fractions must lie in [0, 1]"));
        }
        let (lo, hi) = self.sloth_multiplier;
        if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
            return Err(WorldError::Config("sloth multiplier range must satisfy 1 <= low <= high"));
        }
        let (lo, hi) = self.multilabel_decline;
        if !(unit(lo) && unit(hi) && lo <= hi) {
            return Err(WorldError::Config("multilabel_decline range must lie in [0, 1]"));
        }
        let rel_ok = match &self.reliability {
            ReliabilityDist::Uniform { low, high } => unit(*low) && unit(*high) && low <= high,
            ReliabilityDist::TwoPoint { p_high, high, low } => unit(*p_high) && unit(*high) && unit(*low),
            ReliabilityDist::Levels { values } => !values.is_empty() && values.iter().all(|v| unit(*v)),
        };
        if !rel_ok {
            return Err(WorldError::Config("reliabilities must lie in [0, 1]"));
        }
        if let Some(s) = &self.specialization {
            if !unit(s.matched) || !unit(s.other) {
                return Err(WorldError::Config("specialization reliabilities must lie in [0, 1]"));
            }
        }
        for e in self.class_effects.values() {
            if !(e.busyness > 0.0 && e.busyness.is_finite()) || !unit(e.accuracy_penalty) || !unit(e.ignore_prob) {
                return Err(WorldError::Config("class effects out of range"));
            }
        }
        if !(self.response.median_s > 0.0 && self.response.sigma >= 0.0 && self.response.median_s.is_finite()) {
            return Err(WorldError::Config("response model needs median > 0 and sigma >= 0"));
        }
        let s = &self.schedule;
        if !(s.day_s > 0.0 && s.min_segments >= 1 && s.min_segments <= s.max_segments) {
            return Err(WorldError::Config("schedule needs day_s > 0 and 1 <= min_segments <= max_segments"));
        }
        if !(self.profile_smoothing > 0.0) {
            return Err(WorldError::Smoothing(self.profile_smoothing));
        }
        if self.taxonomy.task_types().is_empty() {
            return Err(WorldError::Config("taxonomy has no task types"));
        }
        for p in self.places.places() {
            if !self.taxonomy.has_class(p.class) {
                return Err(WorldError::Config("place class missing from taxonomy"));
            }
        }
        if !self.taxonomy.has_class(self.places.default_class()) {
            return Err(WorldError::Config("default class missing from taxonomy"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: WorkerId,
    pub location: WorkerLocation,
    pub schedule: MobilitySchedule,
    /// Probability of answering correctly when undistracted.
    pub reliability: f64,
    /// Per-task-type overrides of `reliability`.
    #[serde(default)]
    pub type_reliability: BTreeMap<TaskTypeId, f64>,
    pub strategy: Strategy,
    pub multilabel_decline: f64,
    pub history: ActivityHistory,
    pub profile: WorkerProfile,
    #[serde(skip)]
    stats: ProfileStats,
}

impl Worker {
    /// A worker with an empty history and an unprofiled (uniform prior) profile.
    pub fn new(
        id: WorkerId,
        location: WorkerLocation,
        schedule: MobilitySchedule,
        reliability: f64,
        strategy: Strategy,
    ) -> Self {
        Worker {
            id,
            location,
            schedule,
            reliability,
            type_reliability: BTreeMap::new(),
            strategy,
            multilabel_decline: 0.0,
            history: ActivityHistory::default(),
            profile: WorkerProfile::default(),
            stats: ProfileStats::default(),
        }
    }

    pub fn reliability_for(&self, task_type: TaskTypeId) -> f64 {
        self.type_reliability.get(&task_type).copied().unwrap_or(self.reliability)
    }

    fn response_multiplier(&self) -> f64 {
        match self.strategy {
            Strategy::Sloth { multiplier } => multiplier,
            _ => 1.0,
        }
    }

    /// Draws this worker's label set for a question.
    pub fn draw_labels<R: Rng + ?Sized>(
        &self,
        question: &Question,
        task_type: TaskTypeId,
        effect: &ClassEffect,
        rng: &mut R,
    ) -> BTreeSet<Label> {
        let cands = &question.candidates;
        let n = cands.len();
        let uniform_one = |rng: &mut R| cands[rng.random_range(0..n)];
        let random_subset = |rng: &mut R| {
            let mut s: BTreeSet<Label> = cands.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if s.is_empty() {
                s.insert(uniform_one(rng));
            }
            s
        };
        match self.strategy {
            Strategy::UniformSpammer => {
                if question.multi_label {
                    random_subset(rng)
                } else {
                    BTreeSet::from([uniform_one(rng)])
                }
            }
            Strategy::FixedAnswerSpammer { label_index } => BTreeSet::from([cands[label_index as usize % n]]),
            Strategy::Honest | Strategy::Sloth { .. } => {
                let distracted = rng.random_bool(effect.accuracy_penalty.clamp(0.0, 1.0));
                let p = self.reliability_for(task_type);
                if question.multi_label {
                    if distracted {
                        return random_subset(rng);
                    }
                    let mut s: BTreeSet<Label> = cands
                        .iter()
                        .copied()
                        .filter(|l| question.ground_truth.contains(l) == rng.random_bool(p))
                        .collect();
                    if s.is_empty() {
                        s.insert(uniform_one(rng));
                    }
                    s
                } else if distracted {
                    BTreeSet::from([uniform_one(rng)])
                } else {
                    let truth = *question.ground_truth.iter().next().expect("validated question");
                    if rng.random_bool(p) {
                        BTreeSet::from([truth])
                    } else {
                        let wrong: Vec<Label> = cands.iter().copied().filter(|&l| l != truth).collect();
                        BTreeSet::from([wrong[rng.random_range(0..wrong.len())]])
                    }
                }
            }
        }
    }

    /// Draws a positive response time in seconds.
    pub fn draw_response_time<R: Rng + ?Sized>(&self, model: &ResponseModel, effect: &ClassEffect, rng: &mut R) -> f64 {
        let base =
            LogNormal::new(libm::log(model.median_s), model.sigma).expect("validated response model").sample(rng);
        (base * self.response_multiplier() * effect.busyness).max(f64::MIN_POSITIVE)
    }

    /// Appends an answered record and refreshes the profile.
    pub fn absorb(
        &mut self,
        record: ActivityRecord,
        prs: &PrsTable,
        taxonomy: &Taxonomy,
        alpha: f64,
    ) -> Result<(), WorldError> {
        self.stats.absorb(&record, prs)?;
        self.history.record(record)?;
        self.refresh_profile(taxonomy, alpha);
        Ok(())
    }

    pub fn offer_multi_label(&mut self, taxonomy: &Taxonomy, alpha: f64) {
        self.history.offer_multi_label();
        self.refresh_profile(taxonomy, alpha);
    }

    fn refresh_profile(&mut self, taxonomy: &Taxonomy, alpha: f64) {
        let affinity = core::mem::take(&mut self.profile.class_affinity);
        self.profile = self.stats.profile(taxonomy, affinity, self.history.multi_label_offered(), alpha);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub taxonomy: Taxonomy,
    pub index: LocationIndex,
    pub workers: Vec<Worker>,
    pub class_effects: BTreeMap<LocationClassId, ClassEffect>,
    pub response: ResponseModel,
    pub profile_smoothing: f64,
    clock: f64,
    seed: u64,
}

impl World {
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn effect(&self, class: LocationClassId) -> ClassEffect {
        self.class_effects.get(&class).copied().unwrap_or_default()
    }

    pub fn worker(&self, id: WorkerId) -> Option<&Worker> {
        // Workers are generated with ids equal to their position.
        self.workers.get(id.0 as usize).filter(|w| w.id == id)
    }

    /// Recomputes every profile from its history under a different PRS table.
    pub fn rescore_profiles(&mut self, prs: &PrsTable) -> Result<(), WorldError> {
        for w in &mut self.workers {
            let mut stats = ProfileStats::default();
            for r in w.history.records() {
                stats.absorb(r, prs)?;
            }
            w.stats = stats;
            w.refresh_profile(&self.taxonomy, self.profile_smoothing);
        }
        Ok(())
    }

    /// Moves every worker to the place their schedule names at `to`.
    pub fn step_mobility(&mut self, to: f64) -> Result<(), WorldError> {
        if to < self.clock {
            return Err(WorldError::ClockRegression { clock: self.clock, to });
        }
        if to == self.clock {
            return Ok(());
        }
        for w in &mut self.workers {
            let place = w.schedule.place_at(to);
            let point = self.index.place(place).map_or(w.location.point, |p| p.point);
            w.location = WorkerLocation { point, class: classify_location(point, &self.index) };
        }
        self.clock = to;
        Ok(())
    }
}

/// Functional form of [`World::step_mobility`].
pub fn step_mobility(mut world: World, to: f64) -> Result<World, WorldError> {
    world.step_mobility(to)?;
    Ok(world)
}

/// `round(ratio * n)` with halves rounded away from zero.
pub fn spammer_count(ratio: f64, n: usize) -> usize {
    libm::round(ratio * n as f64) as usize
}

fn draw_reliability(dist: &ReliabilityDist, honest_rank: usize, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        ReliabilityDist::Uniform { low, high } => {
            if low == high {
                *low
            } else {
                rng.random_range(*low..=*high)
            }
        }
        ReliabilityDist::TwoPoint { p_high, high, low } => {
            if rng.random_bool(*p_high) {
                *high
            } else {
                *low
            }
        }
        ReliabilityDist::Levels { values } => values[honest_rank % values.len()],
    }
}

fn draw_schedule(config: &WorldConfig, rng: &mut ChaCha8Rng) -> MobilitySchedule {
    let s = &config.schedule;
    let places = config.places.places();
    let n_seg = rng.random_range(s.min_segments..=s.max_segments);
    let mut starts: Vec<f64> = (1..n_seg).map(|_| rng.random_range(0.0..s.day_s)).collect();
    starts.push(0.0);
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    let segments = starts
        .into_iter()
        .map(|start_s| DwellSegment { start_s, place: places[rng.random_range(0..places.len())].id })
        .collect();
    MobilitySchedule::new(segments, s.day_s).expect("generated schedule is well formed")
}

fn gold_question(arity: u16, truth: Label) -> Question {
    Question {
        id: QuestionId(u32::MAX),
        candidates: (0..arity).map(Label).collect(),
        multi_label: false,
        ground_truth: BTreeSet::from([truth]),
    }
}

/// Builds the population for a seed. Deterministic in `(config, seed)`.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<World, WorldError> {
    config.validate()?;
    let mut rng = stream(seed, Stream::World);
    let n = config.n_workers;

    let n_spam = spammer_count(config.spammer_ratio, n);
    let mut spammers: Vec<usize> = sample(&mut rng, n, n_spam).into_vec();
    spammers.sort_unstable();
    let n_fixed = libm::round(config.fixed_spammer_fraction * n_spam as f64) as usize;
    let mut strategies = alloc::vec![Strategy::Honest; n];
    for (rank, &i) in spammers.iter().enumerate() {
        strategies[i] = if rank < n_fixed {
            Strategy::FixedAnswerSpammer { label_index: config.fixed_spammer_label }
        } else {
            Strategy::UniformSpammer
        };
    }
    let honest: Vec<usize> = (0..n).filter(|&i| !strategies[i].is_spammer()).collect();
    let n_sloth = libm::round(config.sloth_fraction * honest.len() as f64) as usize;
    let mut sloths: Vec<usize> = sample(&mut rng, honest.len(), n_sloth).into_iter().map(|k| honest[k]).collect();
    sloths.sort_unstable();
    for &i in &sloths {
        let (lo, hi) = config.sloth_multiplier;
        let multiplier = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        strategies[i] = Strategy::Sloth { multiplier };
    }

    let task_types: Vec<TaskTypeId> = config.taxonomy.task_types().iter().map(|t| t.id).collect();
    let mut workers = Vec::with_capacity(n);
    let mut honest_rank = 0;
    for (i, strategy) in strategies.into_iter().enumerate() {
        let reliability = draw_reliability(&config.reliability, honest_rank, &mut rng);
        if !strategy.is_spammer() {
            honest_rank += 1;
        }
        let type_reliability = match config.specialization {
            Some(s) => task_types
                .iter()
                .enumerate()
                .map(|(k, &tt)| (tt, if k == i % task_types.len() { s.matched } else { s.other }))
                .collect(),
            None => BTreeMap::new(),
        };
        let (lo, hi) = config.multilabel_decline;
        let multilabel_decline = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let schedule = draw_schedule(config, &mut rng);
        let place = config.places.place(schedule.place_at(0.0)).expect("schedule uses index places");
        let point = place.point;
        let affinity = class_affinity(&schedule, &config.places, &config.taxonomy);
        let mut w = Worker {
            id: WorkerId(i as u32),
            location: WorkerLocation { point, class: classify_location(point, &config.places) },
            schedule,
            reliability,
            type_reliability,
            strategy,
            multilabel_decline,
            history: ActivityHistory::default(),
            profile: WorkerProfile { class_affinity: affinity, ..WorkerProfile::default() },
            stats: ProfileStats::default(),
        };
        w.refresh_profile(&config.taxonomy, config.profile_smoothing);
        workers.push(w);
    }

    let mut world = World {
        taxonomy: config.taxonomy.clone(),
        index: config.places.clone(),
        workers,
        class_effects: config.class_effects.clone(),
        response: config.response,
        profile_smoothing: config.profile_smoothing,
        clock: 0.0,
        seed,
    };
    if config.warmup_records_per_type > 0 {
        warm_up(&mut world, config.warmup_records_per_type, &mut rng)?;
    }
    Ok(world)
}

/// Gives every worker a past of binary gold answers, one per task type in
/// turn, spaced ten minutes apart and ending just before time zero.
fn warm_up(world: &mut World, per_type: u32, rng: &mut ChaCha8Rng) -> Result<(), WorldError> {
    const SPACING_S: f64 = 600.0;
    let task_types: Vec<TaskTypeId> = world.taxonomy.task_types().iter().map(|t| t.id).collect();
    let total = per_type as usize * task_types.len();
    let prs = PrsTable::default();
    for wi in 0..world.workers.len() {
        for j in 0..total {
            let tt = task_types[j % task_types.len()];
            let timestamp = -((total - j) as f64) * SPACING_S;
            let worker = &world.workers[wi];
            let place = worker.schedule.place_at(timestamp);
            let class = world.index.place(place).map_or(world.index.default_class(), |p| p.class);
            let effect = world.effect(class);
            let truth = Label(rng.random_range(0..2));
            let q = gold_question(2, truth);
            let labels = worker.draw_labels(&q, tt, &effect, rng);
            let t = worker.draw_response_time(&world.response, &effect, rng);
            let record = ActivityRecord {
                task: TaskId(u32::MAX),
                task_type: tt,
                class,
                t,
                correct: labels == q.ground_truth,
                multi_label: false,
                timestamp,
            };
            let (tax, alpha) = (&world.taxonomy, world.profile_smoothing);
            world.workers[wi].absorb(record, &prs, tax, alpha)?;
        }
    }
    Ok(())
}
