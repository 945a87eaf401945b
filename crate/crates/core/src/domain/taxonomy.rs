use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DomainError, LocationClassId, TaskTypeId, VariantId};

/// Class every unmatched point falls back to.
pub const OPEN_AREA: LocationClassId = LocationClassId(0);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationClass {
    pub id: LocationClassId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationVariant {
    pub id: VariantId,
    pub parent: LocationClassId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskType {
    pub id: TaskTypeId,
    pub name: String,
}

/// The location classes, their variants, and the task types of a deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTaxonomy", into = "RawTaxonomy")]
pub struct Taxonomy {
    classes: Vec<LocationClass>,
    variants: Vec<LocationVariant>,
    task_types: Vec<TaskType>,
}

#[derive(Serialize, Deserialize)]
struct RawTaxonomy {
    classes: Vec<LocationClass>,
    #[serde(default)]
    variants: Vec<LocationVariant>,
    task_types: Vec<TaskType>,
}

impl TryFrom<RawTaxonomy> for Taxonomy {
    type Error = DomainError;

    fn try_from(raw: RawTaxonomy) -> Result<Self, DomainError> {
        Taxonomy::new(raw.classes, raw.variants, raw.task_types)
    }
}

impl From<Taxonomy> for RawTaxonomy {
    fn from(t: Taxonomy) -> Self {
        RawTaxonomy { classes: t.classes, variants: t.variants, task_types: t.task_types }
    }
}

impl Taxonomy {
    pub fn new(
        mut classes: Vec<LocationClass>,
        mut variants: Vec<LocationVariant>,
        mut task_types: Vec<TaskType>,
    ) -> Result<Self, DomainError> {
        classes.sort_by_key(|c| c.id);
        variants.sort_by_key(|v| v.id);
        task_types.sort_by_key(|t| t.id);
        for w in classes.windows(2) {
            if w[0].id == w[1].id {
                return Err(DomainError::DuplicateClass(w[0].id));
            }
        }
        for w in variants.windows(2) {
            if w[0].id == w[1].id {
                return Err(DomainError::DuplicateVariant(w[0].id));
            }
        }
        for w in task_types.windows(2) {
            if w[0].id == w[1].id {
                return Err(DomainError::DuplicateTaskType(w[0].id));
            }
        }
        if classes.iter().any(|c| c.name.trim().is_empty()) {
            return Err(DomainError::EmptyName("location class"));
        }
        if task_types.iter().any(|t| t.name.trim().is_empty()) {
            return Err(DomainError::EmptyName("task type"));
        }
        if variants.iter().any(|v| v.name.trim().is_empty()) {
            return Err(DomainError::EmptyName("location variant"));
        }
        let taxonomy = Taxonomy { classes, variants, task_types };
        for v in &taxonomy.variants {
            if !taxonomy.has_class(v.parent) {
                return Err(DomainError::UnknownClass(v.parent));
            }
        }
        Ok(taxonomy)
    }

    /// Twelve urban location classes (including the `open area` fallback),
    /// a few variants per class and four task types. A stand-in taxonomy for
    /// synthetic scenarios, not a canonical one.
    pub fn default_city() -> Self {
        let class_names = [
            "open area",
            "home",
            "work place",
            "school",
            "shopping mall",
            "transport",
            "sport object",
            "hospital",
            "restaurant",
            "park",
            "cultural venue",
            "religious site",
        ];
        let classes = class_names
            .iter()
            .enumerate()
            .map(|(i, n)| LocationClass { id: LocationClassId(i as u16), name: n.to_string() })
            .collect();
        let variant_names: [(u16, &str); 14] = [
            (2, "office"),
            (2, "factory"),
            (3, "primary school"),
            (3, "university"),
            (5, "train"),
            (5, "bus stop"),
            (5, "airport"),
            (6, "hall"),
            (6, "amusement park"),
            (6, "public soccer field"),
            (7, "clinic"),
            (8, "cafe"),
            (10, "museum"),
            (10, "cinema"),
        ];
        let variants = variant_names
            .iter()
            .enumerate()
            .map(|(i, (parent, n))| LocationVariant {
                id: VariantId(i as u16),
                parent: LocationClassId(*parent),
                name: n.to_string(),
            })
            .collect();
        let task_types = ["translation", "image description", "census", "crisis mapping"]
            .iter()
            .enumerate()
            .map(|(i, n)| TaskType { id: TaskTypeId(i as u16), name: n.to_string() })
            .collect();
        Taxonomy::new(classes, variants, task_types).expect("built-in taxonomy is valid")
    }

    pub fn classes(&self) -> &[LocationClass] {
        &self.classes
    }

    pub fn variants(&self) -> &[LocationVariant] {
        &self.variants
    }

    pub fn task_types(&self) -> &[TaskType] {
        &self.task_types
    }

    pub fn has_class(&self, id: LocationClassId) -> bool {
        self.classes.binary_search_by_key(&id, |c| c.id).is_ok()
    }

    pub fn has_task_type(&self, id: TaskTypeId) -> bool {
        self.task_types.binary_search_by_key(&id, |t| t.id).is_ok()
    }

    pub fn class(&self, id: LocationClassId) -> Option<&LocationClass> {
        self.classes.binary_search_by_key(&id, |c| c.id).ok().map(|i| &self.classes[i])
    }

    pub fn class_by_name(&self, name: &str) -> Option<&LocationClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn task_type(&self, id: TaskTypeId) -> Option<&TaskType> {
        self.task_types.binary_search_by_key(&id, |t| t.id).ok().map(|i| &self.task_types[i])
    }
}
