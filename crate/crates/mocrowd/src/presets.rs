//! Ready-made scenarios.

use std::collections::BTreeSet;

use mocrowd_core::dispatch::NetworkModel;
use mocrowd_core::domain::{GeoPoint, LocationClassId, TaskKind, TaskTypeId, Taxonomy};
use mocrowd_core::engine::{city_grid, ScenarioConfig, TaskCount, TaskGenConfig};
use mocrowd_core::world::{ClassEffect, WorldConfig};

/// Central Warsaw.
pub fn city_center() -> GeoPoint {
    GeoPoint::new(52.2297, 21.0122).expect("valid coordinates")
}

/// `n_workers` default workers over a grid of `per_class` places per class
/// of the default city taxonomy, 400 m apart with a 120 m radius.
pub fn city_world(n_workers: usize, per_class: usize) -> WorldConfig {
    let taxonomy = Taxonomy::default_city();
    let index = city_grid(&taxonomy, city_center(), per_class, 400.0, 120.0).expect("grid places are valid");
    WorldConfig::new(taxonomy, index, n_workers)
}

/// A mixed scenario exercising every part of the simulator: four task
/// types, some emergencies, multi-label questions, spammers and slow
/// workers, busy transport hubs and malls, a lossy network and two
/// location-learning rounds.
pub fn example_city(n_workers: usize, tasks_per_type: u32, seed: u64) -> ScenarioConfig {
    let mut world = city_world(n_workers, 2);
    world.spammer_ratio = 0.1;
    world.sloth_fraction = 0.1;
    world.warmup_records_per_type = 10;
    world.multilabel_decline = (0.0, 0.3);
    let busy = ClassEffect { busyness: 3.0, accuracy_penalty: 0.3, ignore_prob: 0.2 };
    world.class_effects.insert(LocationClassId(4), busy);
    world.class_effects.insert(LocationClassId(5), busy);

    let mut counts: Vec<TaskCount> =
        (0..4).map(|t| TaskCount { task_type: TaskTypeId(t), kind: TaskKind::Normal, count: tasks_per_type }).collect();
    counts.push(TaskCount { task_type: TaskTypeId(3), kind: TaskKind::Emergency, count: (tasks_per_type / 10).max(1) });
    let mut tasks = TaskGenConfig::new(counts);
    tasks.questions_per_task = 2;
    tasks.labels_per_question = 3;
    tasks.multi_label_fraction = 0.1;
    tasks.admissible =
        Some(BTreeSet::from([LocationClassId(1), LocationClassId(2), LocationClassId(3), LocationClassId(9)]));

    let mut config = ScenarioConfig::new(world, tasks, seed);
    config.network = NetworkModel { availability_prob: 0.9, delivery_failure_prob: 0.05, ..NetworkModel::default() };
    config.geolearn.rounds = 2;
    config.geolearn.params.min_samples = 10;
    config
}
