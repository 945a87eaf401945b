//! Shared vocabulary: identifiers, geography, the location taxonomy and tasks.

mod geo;
mod places;
mod task;
mod taxonomy;

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geo::{haversine_distance, GeoPoint, EARTH_RADIUS_M};
pub use places::{classify_location, LocationIndex, Place};
pub use task::{validate_task, Question, Task, TaskContext, TaskKind, ValidationReport, Violation};
pub use taxonomy::{LocationClass, LocationVariant, TaskType, Taxonomy, OPEN_AREA};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident($inner:ty)) => {
        $(#[$m])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(WorkerId(u32));
id_type!(TaskId(u32));
id_type!(
    /// Question ids are unique across all tasks of a run.
    QuestionId(u32)
);
id_type!(PlaceId(u32));
id_type!(LocationClassId(u16));
id_type!(VariantId(u16));
id_type!(TaskTypeId(u16));
id_type!(
    /// A candidate answer, meaningful only relative to its question.
    Label(u16)
);

/// Where a worker currently is: a coordinate and the class of that spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerLocation {
    pub point: GeoPoint,
    pub class: LocationClassId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("duplicate location class id {0}")]
    DuplicateClass(LocationClassId),
    #[error("duplicate task type id {0}")]
    DuplicateTaskType(TaskTypeId),
    #[error("duplicate variant id {0}")]
    DuplicateVariant(VariantId),
    #[error("duplicate place id {0}")]
    DuplicatePlace(PlaceId),
    #[error("empty name for {0}")]
    EmptyName(&'static str),
    #[error("unknown location class {0}")]
    UnknownClass(LocationClassId),
    #[error("place {0} has non-positive radius")]
    PlaceRadius(PlaceId),
    #[error("location index has no places")]
    NoPlaces,
}
