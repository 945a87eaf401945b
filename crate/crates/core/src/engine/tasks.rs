use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::domain::{
    validate_task, Label, LocationClassId, LocationIndex, Place, Question, QuestionId, Task, TaskContext, TaskId,
    TaskKind, TaskTypeId, Taxonomy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCount {
    pub task_type: TaskTypeId,
    #[serde(default = "normal")]
    pub kind: TaskKind,
    pub count: u32,
}

fn normal() -> TaskKind {
    TaskKind::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenConfig {
    pub counts: Vec<TaskCount>,
    #[serde(default = "one")]
    pub questions_per_task: u32,
    #[serde(default = "two")]
    pub labels_per_question: u16,
    #[serde(default)]
    pub multi_label_fraction: f64,
    #[serde(default = "normal_radius")]
    pub radius_m: f64,
    #[serde(default = "emergency_radius")]
    pub emergency_radius_m: f64,
    /// Classes every task admits; when absent a task admits the class of the
    /// place it is centred on. Tasks are only centred on admitted places.
    #[serde(default)]
    pub admissible: Option<BTreeSet<LocationClassId>>,
    #[serde(default = "payload")]
    pub payload_bytes: u32,
}

fn one() -> u32 {
    1
}

fn two() -> u16 {
    2
}

fn normal_radius() -> f64 {
    1000.0
}

fn emergency_radius() -> f64 {
    1500.0
}

fn payload() -> u32 {
    512
}

impl TaskGenConfig {
    pub fn new(counts: Vec<TaskCount>) -> Self {
        TaskGenConfig {
            counts,
            questions_per_task: one(),
            labels_per_question: two(),
            multi_label_fraction: 0.0,
            radius_m: normal_radius(),
            emergency_radius_m: emergency_radius(),
            admissible: None,
            payload_bytes: payload(),
        }
    }

    /// `count` normal tasks of one type.
    pub fn uniform(task_type: TaskTypeId, count: u32) -> Self {
        TaskGenConfig::new(alloc::vec![TaskCount { task_type, kind: TaskKind::Normal, count }])
    }

    pub fn total_tasks(&self) -> u64 {
        self.counts.iter().map(|c| c.count as u64).sum()
    }

    pub fn total_questions(&self) -> u64 {
        self.total_tasks() * self.questions_per_task as u64
    }

    pub(crate) fn validate(
        &self,
        taxonomy: &Taxonomy,
        index: &LocationIndex,
        emergency_max_radius_m: f64,
    ) -> Result<(), EngineError> {
        let bad = |m| Err(EngineError::InvalidConfig(m));
        if self.counts.iter().any(|c| !taxonomy.has_task_type(c.task_type)) {
            return bad("task count names an unknown task type");
        }
        if self.questions_per_task == 0 {
            return bad("questions_per_task must be at least 1");
        }
        if self.labels_per_question < 2 {
            return bad("labels_per_question must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.multi_label_fraction) {
            return bad("multi_label_fraction must lie in [0, 1]");
        }
        if !(self.radius_m > 0.0) || !(self.emergency_radius_m > 0.0) {
            return bad("task radii must be positive");
        }
        if self.emergency_radius_m > emergency_max_radius_m {
            return bad("emergency_radius_m exceeds emergency_max_radius_m");
        }
        if let Some(set) = &self.admissible {
            if set.iter().any(|c| !taxonomy.has_class(*c)) {
                return bad("admissible set names an unknown class");
            }
            if self.total_tasks() > 0 && !set.is_empty() && !index.places().iter().any(|p| set.contains(&p.class)) {
                return bad("no place has an admissible class");
            }
        }
        Ok(())
    }
}

/// Tasks with arrival times uniform over `[0, duration_s)`, numbered in
/// arrival order. Question ids are unique across the run.
pub fn generate_tasks<R: Rng + ?Sized>(
    config: &TaskGenConfig,
    taxonomy: &Taxonomy,
    index: &LocationIndex,
    duration_s: f64,
    emergency_max_radius_m: f64,
    rng: &mut R,
) -> Result<Vec<Task>, EngineError> {
    config.validate(taxonomy, index, emergency_max_radius_m)?;
    let centres: Vec<&Place> = match &config.admissible {
        Some(set) if !set.is_empty() => index.places().iter().filter(|p| set.contains(&p.class)).collect(),
        _ => index.places().iter().collect(),
    };

    let mut drafts: Vec<(f64, usize, TaskTypeId, TaskKind)> = Vec::new();
    for c in &config.counts {
        for _ in 0..c.count {
            let at = rng.random_range(0.0..duration_s);
            drafts.push((at, drafts.len(), c.task_type, c.kind));
        }
    }
    drafts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let labels: Vec<Label> = (0..config.labels_per_question).map(Label).collect();
    let mut next_question = 0u32;
    let mut tasks = Vec::with_capacity(drafts.len());
    for (i, (created_at, _, task_type, kind)) in drafts.into_iter().enumerate() {
        let place = centres[rng.random_range(0..centres.len())];
        let admissible = match &config.admissible {
            Some(set) => set.clone(),
            None => BTreeSet::from([place.class]),
        };
        let radius_m = match kind {
            TaskKind::Normal => config.radius_m,
            TaskKind::Emergency => config.emergency_radius_m,
        };
        let questions = (0..config.questions_per_task)
            .map(|_| {
                let multi_label = rng.random_bool(config.multi_label_fraction);
                let ground_truth = if multi_label {
                    let mut s: BTreeSet<Label> = labels.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                    if s.is_empty() {
                        s.insert(labels[rng.random_range(0..labels.len())]);
                    }
                    s
                } else {
                    BTreeSet::from([labels[rng.random_range(0..labels.len())]])
                };
                let id = QuestionId(next_question);
                next_question += 1;
                Question { id, candidates: labels.clone(), multi_label, ground_truth }
            })
            .collect();
        let task = Task {
            id: TaskId(i as u32),
            kind,
            task_type,
            context: TaskContext { center: place.point, radius_m, admissible },
            questions,
            payload_bytes: config.payload_bytes,
            created_at,
        };
        debug_assert!(validate_task(&task, taxonomy, emergency_max_radius_m).is_valid());
        tasks.push(task);
    }
    Ok(tasks)
}
