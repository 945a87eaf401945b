use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{GeoPoint, Label, LocationClassId, QuestionId, TaskId, TaskTypeId, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Normal,
    /// Needs an immediate answer from people on the spot; always geofenced.
    Emergency,
}

/// Where and for whom a task applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskContext {
    pub center: GeoPoint,
    /// Geofence radius in meters; `f64::INFINITY` is allowed for normal tasks.
    pub radius_m: f64,
    /// Location classes a worker should be in. Empty means any class.
    #[serde(default)]
    pub admissible: BTreeSet<LocationClassId>,
}

impl TaskContext {
    pub fn admits(&self, class: LocationClassId) -> bool {
        self.admissible.is_empty() || self.admissible.contains(&class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub candidates: Vec<Label>,
    #[serde(default)]
    pub multi_label: bool,
    /// Hidden from workers; used for grading only.
    pub ground_truth: BTreeSet<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    pub task_type: TaskTypeId,
    pub context: TaskContext,
    pub questions: Vec<Question>,
    pub payload_bytes: u32,
    /// Simulated seconds since the start of the run.
    pub created_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoQuestions,
    NonPositiveRadius,
    EmergencyRadius { radius_m: f64, max_m: f64 },
    UnknownTaskType(TaskTypeId),
    UnknownClass(LocationClassId),
    TooFewLabels(QuestionId),
    DuplicateLabel(QuestionId),
    EmptyTruth(QuestionId),
    TruthNotCandidate(QuestionId),
    SingleLabelTruth(QuestionId),
    NegativeCreationTime,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoQuestions => write!(f, "task has no questions"),
            Violation::NonPositiveRadius => write!(f, "radius must be positive"),
            Violation::EmergencyRadius { radius_m, max_m } => {
                write!(f, "emergency radius {radius_m} m must be finite and at most {max_m} m")
            }
            Violation::UnknownTaskType(t) => write!(f, "unknown task type {t}"),
            Violation::UnknownClass(c) => write!(f, "unknown admissible location class {c}"),
            Violation::TooFewLabels(q) => write!(f, "question {q}: too few labels (need at least 2)"),
            Violation::DuplicateLabel(q) => write!(f, "question {q}: duplicate candidate label"),
            Violation::EmptyTruth(q) => write!(f, "question {q}: empty ground truth"),
            Violation::TruthNotCandidate(q) => {
                write!(f, "question {q}: ground truth not among candidate labels")
            }
            Violation::SingleLabelTruth(q) => {
                write!(f, "question {q}: single-label question needs exactly one true label")
            }
            Violation::NegativeCreationTime => write!(f, "creation time must be non-negative"),
        }
    }
}

/// Every invariant a [`Task`] breaks; empty when the task is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when some violation's message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        use alloc::string::ToString;
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }
}

pub fn validate_task(task: &Task, taxonomy: &Taxonomy, emergency_max_radius_m: f64) -> ValidationReport {
    let mut out = Vec::new();
    let radius = task.context.radius_m;
    if !(radius > 0.0) {
        out.push(Violation::NonPositiveRadius);
    }
    if task.kind == TaskKind::Emergency && !(radius.is_finite() && radius <= emergency_max_radius_m) {
        out.push(Violation::EmergencyRadius { radius_m: radius, max_m: emergency_max_radius_m });
    }
    if !taxonomy.has_task_type(task.task_type) {
        out.push(Violation::UnknownTaskType(task.task_type));
    }
    for &c in &task.context.admissible {
        if !taxonomy.has_class(c) {
            out.push(Violation::UnknownClass(c));
        }
    }
    if !(task.created_at >= 0.0) {
        out.push(Violation::NegativeCreationTime);
    }
    if task.questions.is_empty() {
        out.push(Violation::NoQuestions);
    }
    for q in &task.questions {
        let distinct: BTreeSet<Label> = q.candidates.iter().copied().collect();
        if distinct.len() != q.candidates.len() {
            out.push(Violation::DuplicateLabel(q.id));
        }
        if distinct.len() < 2 {
            out.push(Violation::TooFewLabels(q.id));
        }
        if q.ground_truth.is_empty() {
            out.push(Violation::EmptyTruth(q.id));
        } else if !q.ground_truth.is_subset(&distinct) {
            out.push(Violation::TruthNotCandidate(q.id));
        }
        if !q.multi_label && q.ground_truth.len() > 1 {
            out.push(Violation::SingleLabelTruth(q.id));
        }
    }
    ValidationReport { violations: out }
}
