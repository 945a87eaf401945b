//! Activity histories and the worker profiles derived from them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{MobilitySchedule, WorldError};
use crate::domain::{LocationClassId, LocationIndex, TaskId, TaskTypeId, Taxonomy};
use crate::quality::PrsTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub task: TaskId,
    pub task_type: TaskTypeId,
    /// Location class of the worker when answering.
    pub class: LocationClassId,
    /// Response time in seconds, always positive.
    pub t: f64,
    pub correct: bool,
    pub multi_label: bool,
    pub timestamp: f64,
}

/// Answered records in time order, plus how many multi-label jobs were
/// offered (answered or not).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityHistory {
    records: Vec<ActivityRecord>,
    multi_label_offered: u32,
}

impl ActivityHistory {
    pub fn records(&self) -> &[ActivityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn multi_label_offered(&self) -> u32 {
        self.multi_label_offered
    }

    /// Appends a record; timestamps must not go backwards.
    pub fn record(&mut self, record: ActivityRecord) -> Result<(), WorldError> {
        if !(record.t > 0.0) {
            return Err(WorldError::NonPositiveResponse(record.t));
        }
        if let Some(last) = self.records.last() {
            if record.timestamp < last.timestamp {
                return Err(WorldError::OutOfOrder { last: last.timestamp, got: record.timestamp });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn offer_multi_label(&mut self) {
        self.multi_label_offered += 1;
    }
}

/// Functional form of [`ActivityHistory::record`].
pub fn record_activity(mut history: ActivityHistory, record: ActivityRecord) -> Result<ActivityHistory, WorldError> {
    history.record(record)?;
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkerProfile {
    /// Smoothed empirical accuracy per task type.
    pub skill: BTreeMap<TaskTypeId, f64>,
    /// Mean personal response time score per task type (0 without samples).
    pub mean_prs: BTreeMap<TaskTypeId, f64>,
    /// Share of the day spent in each location class; sums to 1.
    pub class_affinity: BTreeMap<LocationClassId, f64>,
    pub multilabel_willingness: f64,
    pub sample_counts: BTreeMap<TaskTypeId, u32>,
}

impl WorkerProfile {
    /// Skill for a task type, 0.5 when the type was never profiled.
    pub fn skill_for(&self, task_type: TaskTypeId) -> f64 {
        self.skill.get(&task_type).copied().unwrap_or(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
struct TypeStats {
    answered: u32,
    correct: u32,
    prs_sum: f64,
}

/// Running sufficient statistics for a profile, so the simulator can update
/// profiles one answer at a time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileStats {
    per_type: BTreeMap<TaskTypeId, TypeStats>,
    multi_label_accepted: u32,
}

impl ProfileStats {
    pub fn absorb(&mut self, record: &ActivityRecord, prs: &PrsTable) -> Result<(), WorldError> {
        let score = prs.score(record.task_type, record.t).map_err(|_| WorldError::NonPositiveResponse(record.t))?;
        let s = self.per_type.entry(record.task_type).or_default();
        s.answered += 1;
        s.correct += record.correct as u32;
        s.prs_sum += score;
        if record.multi_label {
            self.multi_label_accepted += 1;
        }
        Ok(())
    }

    pub fn profile(
        &self,
        taxonomy: &Taxonomy,
        class_affinity: BTreeMap<LocationClassId, f64>,
        multi_label_offered: u32,
        alpha: f64,
    ) -> WorkerProfile {
        let mut p = WorkerProfile { class_affinity, ..WorkerProfile::default() };
        for tt in taxonomy.task_types() {
            let s = self.per_type.get(&tt.id).copied().unwrap_or_default();
            p.skill.insert(tt.id, (s.correct as f64 + alpha) / (s.answered as f64 + 2.0 * alpha));
            let mean = if s.answered > 0 { s.prs_sum / s.answered as f64 } else { 0.0 };
            p.mean_prs.insert(tt.id, mean);
            p.sample_counts.insert(tt.id, s.answered);
        }
        let offered = multi_label_offered.max(self.multi_label_accepted);
        p.multilabel_willingness = (self.multi_label_accepted as f64 + alpha) / (offered as f64 + 2.0 * alpha);
        p
    }
}

/// Dwell-time fractions over every class of the taxonomy (zeros included).
pub fn class_affinity(
    schedule: &MobilitySchedule,
    index: &LocationIndex,
    taxonomy: &Taxonomy,
) -> BTreeMap<LocationClassId, f64> {
    let mut out: BTreeMap<LocationClassId, f64> = taxonomy.classes().iter().map(|c| (c.id, 0.0)).collect();
    for (class, frac) in schedule.class_fractions(index) {
        out.insert(class, frac);
    }
    out
}

/// Profile of a worker from their history and mobility, with Laplace
/// smoothing `alpha` on skill and multi-label willingness.
pub fn build_profile(
    history: &ActivityHistory,
    schedule: &MobilitySchedule,
    index: &LocationIndex,
    taxonomy: &Taxonomy,
    alpha: f64,
    prs: &PrsTable,
) -> Result<WorkerProfile, WorldError> {
    if !(alpha > 0.0) {
        return Err(WorldError::Smoothing(alpha));
    }
    let mut stats = ProfileStats::default();
    for r in history.records() {
        stats.absorb(r, prs)?;
    }
    Ok(stats.profile(taxonomy, class_affinity(schedule, index, taxonomy), history.multi_label_offered(), alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GeoPoint, Place, PlaceId, OPEN_AREA};
    use crate::quality::PrsParams;
    use crate::world::DwellSegment;
    use alloc::string::String;
    use proptest::prelude::*;

    const TRANSLATION: TaskTypeId = TaskTypeId(0);
    const SCHOOL: LocationClassId = LocationClassId(3);

    fn index() -> LocationIndex {
        let places = (0..12u32)
            .map(|i| Place {
                id: PlaceId(i),
                name: String::new(),
                point: GeoPoint::new(52.0 + i as f64 * 0.01, 21.0).unwrap(),
                class: LocationClassId(i as u16),
                variant: None,
                radius_m: 100.0,
            })
            .collect();
        LocationIndex::new(places, OPEN_AREA).unwrap()
    }

    fn rec(ts: f64, correct: bool) -> ActivityRecord {
        ActivityRecord {
            task: TaskId(0),
            task_type: TRANSLATION,
            class: SCHOOL,
            t: 30.0,
            correct,
            multi_label: false,
            timestamp: ts,
        }
    }

    fn prs() -> PrsTable {
        PrsTable::uniform(PrsParams::new(30.0, 1.0).unwrap())
    }

    #[test]
    fn history_ordering() {
        let h = record_activity(ActivityHistory::default(), rec(5.0, true)).unwrap();
        assert_eq!(h.len(), 1);
        let h = record_activity(h, rec(6.0, false)).unwrap();
        assert_eq!(h.records()[0].timestamp, 5.0);
        assert_eq!(h.records()[1].timestamp, 6.0);
        assert_eq!(record_activity(h, rec(1.0, true)), Err(WorldError::OutOfOrder { last: 6.0, got: 1.0 }));
    }

    #[test]
    fn empty_history_gives_uniform_prior() {
        let sched = MobilitySchedule::stationary(PlaceId(3), 86_400.0).unwrap();
        let tax = Taxonomy::default_city();
        let p = build_profile(&ActivityHistory::default(), &sched, &index(), &tax, 1.0, &prs()).unwrap();
        assert!(p.skill.values().all(|&s| s == 0.5));
        assert_eq!(p.skill.len(), tax.task_types().len());
        assert_eq!(p.class_affinity[&SCHOOL], 1.0);
        assert_eq!(p.multilabel_willingness, 0.5);
        assert!(build_profile(&ActivityHistory::default(), &sched, &index(), &tax, 0.0, &prs()).is_err());
    }

    #[test]
    fn nine_of_ten_smooths_to_ten_twelfths() {
        let mut h = ActivityHistory::default();
        for i in 0..10 {
            h.record(rec(i as f64, i != 4)).unwrap();
        }
        let sched = MobilitySchedule::stationary(PlaceId(3), 86_400.0).unwrap();
        let p = build_profile(&h, &sched, &index(), &Taxonomy::default_city(), 1.0, &prs()).unwrap();
        assert!((p.skill[&TRANSLATION] - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(p.mean_prs[&TRANSLATION], 1.0);
        assert_eq!(p.sample_counts[&TRANSLATION], 10);
    }

    #[test]
    fn multilabel_willingness_counts_offers() {
        let mut h = ActivityHistory::default();
        for _ in 0..4 {
            h.offer_multi_label();
        }
        let mut r = rec(0.0, true);
        r.multi_label = true;
        h.record(r).unwrap();
        let sched = MobilitySchedule::stationary(PlaceId(3), 86_400.0).unwrap();
        let p = build_profile(&h, &sched, &index(), &Taxonomy::default_city(), 1.0, &prs()).unwrap();
        assert!((p.multilabel_willingness - 2.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn affinity_sums_to_one(gaps in prop::collection::vec((1.0f64..9000.0, 0u32..12), 1..10)) {
            let mut segments = Vec::new();
            let mut t = 0.0;
            for &(g, place) in &gaps {
                segments.push(DwellSegment { start_s: t, place: PlaceId(place) });
                t += g;
            }
            let sched = MobilitySchedule::new(segments, t).unwrap();
            let aff = class_affinity(&sched, &index(), &Taxonomy::default_city());
            let sum: f64 = aff.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(aff.values().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn smoothed_skill_is_strictly_inside_unit_interval(
            outcomes in prop::collection::vec(any::<bool>(), 0..200),
            alpha in 0.01f64..5.0,
        ) {
            let mut h = ActivityHistory::default();
            for (i, &c) in outcomes.iter().enumerate() {
                h.record(rec(i as f64, c)).unwrap();
            }
            let sched = MobilitySchedule::stationary(PlaceId(0), 100.0).unwrap();
            let p = build_profile(&h, &sched, &index(), &Taxonomy::default_city(), alpha, &prs()).unwrap();
            for &s in p.skill.values() {
                prop_assert!(s > 0.0 && s < 1.0);
            }
        }
    }

    #[test]
    fn incremental_stats_match_batch_build() {
        let mut h = ActivityHistory::default();
        let mut stats = ProfileStats::default();
        for i in 0..25 {
            let mut r = rec(i as f64, i % 3 != 0);
            r.task_type = TaskTypeId((i % 4) as u16);
            r.t = 5.0 + i as f64;
            stats.absorb(&r, &prs()).unwrap();
            h.record(r).unwrap();
        }
        let tax = Taxonomy::default_city();
        let sched = MobilitySchedule::stationary(PlaceId(5), 1000.0).unwrap();
        let batch = build_profile(&h, &sched, &index(), &tax, 1.0, &prs()).unwrap();
        let inc = stats.profile(&tax, class_affinity(&sched, &index(), &tax), 0, 1.0);
        assert_eq!(batch, inc);
    }
}
