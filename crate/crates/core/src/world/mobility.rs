use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::domain::{LocationClassId, LocationIndex, PlaceId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellSegment {
    pub start_s: f64,
    pub place: PlaceId,
}

/// A repeating day of dwell segments. Segment `i` covers
/// `[start_i, start_{i+1})`; the last one runs to the end of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct MobilitySchedule {
    segments: Vec<DwellSegment>,
    day_s: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    segments: Vec<DwellSegment>,
    day_s: f64,
}

impl TryFrom<RawSchedule> for MobilitySchedule {
    type Error = WorldError;

    fn try_from(raw: RawSchedule) -> Result<Self, WorldError> {
        MobilitySchedule::new(raw.segments, raw.day_s)
    }
}

impl From<MobilitySchedule> for RawSchedule {
    fn from(s: MobilitySchedule) -> Self {
        RawSchedule { segments: s.segments, day_s: s.day_s }
    }
}

impl MobilitySchedule {
    pub fn new(segments: Vec<DwellSegment>, day_s: f64) -> Result<Self, WorldError> {
        if !(day_s > 0.0) || !day_s.is_finite() {
            return Err(WorldError::Schedule("day length must be positive"));
        }
        match segments.first() {
            None => return Err(WorldError::Schedule("no segments")),
            Some(s) if s.start_s != 0.0 => return Err(WorldError::Schedule("first segment must start at 0")),
            _ => {}
        }
        if segments.windows(2).any(|w| !(w[0].start_s < w[1].start_s)) {
            return Err(WorldError::Schedule("segment starts must strictly increase"));
        }
        if segments.last().is_some_and(|s| !(s.start_s < day_s)) {
            return Err(WorldError::Schedule("segment starts past the end of the day"));
        }
        Ok(MobilitySchedule { segments, day_s })
    }

    /// The whole day at one place.
    pub fn stationary(place: PlaceId, day_s: f64) -> Result<Self, WorldError> {
        MobilitySchedule::new(alloc::vec![DwellSegment { start_s: 0.0, place }], day_s)
    }

    pub fn segments(&self) -> &[DwellSegment] {
        &self.segments
    }

    pub fn day_s(&self) -> f64 {
        self.day_s
    }

    /// Time of day of an absolute simulated time.
    pub fn time_of_day(&self, t: f64) -> f64 {
        let r = libm::fmod(t, self.day_s);
        if r < 0.0 {
            r + self.day_s
        } else {
            r
        }
    }

    pub fn segment_at(&self, t: f64) -> &DwellSegment {
        let tod = self.time_of_day(t);
        let i = self.segments.partition_point(|s| s.start_s <= tod);
        &self.segments[i.saturating_sub(1)]
    }

    pub fn place_at(&self, t: f64) -> PlaceId {
        self.segment_at(t).place
    }

    fn durations(&self) -> impl Iterator<Item = (PlaceId, f64)> + '_ {
        self.segments.iter().enumerate().map(move |(i, s)| {
            let end = self.segments.get(i + 1).map_or(self.day_s, |n| n.start_s);
            (s.place, end - s.start_s)
        })
    }

    /// Fraction of the day spent in each location class. Unknown places
    /// count toward the index's default class.
    pub fn class_fractions(&self, index: &LocationIndex) -> BTreeMap<LocationClassId, f64> {
        let mut out: BTreeMap<LocationClassId, f64> = BTreeMap::new();
        for (place, dur) in self.durations() {
            let class = index.place(place).map_or(index.default_class(), |p| p.class);
            *out.entry(class).or_default() += dur;
        }
        let total: f64 = out.values().sum();
        out.values_mut().for_each(|v| *v /= total);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn seg(start_s: f64, place: u32) -> DwellSegment {
        DwellSegment { start_s, place: PlaceId(place) }
    }

    #[test]
    fn validation() {
        assert!(MobilitySchedule::new(vec![], 10.0).is_err());
        assert!(MobilitySchedule::new(vec![seg(1.0, 0)], 10.0).is_err());
        assert!(MobilitySchedule::new(vec![seg(0.0, 0), seg(0.0, 1)], 10.0).is_err());
        assert!(MobilitySchedule::new(vec![seg(0.0, 0), seg(10.0, 1)], 10.0).is_err());
        assert!(MobilitySchedule::new(vec![seg(0.0, 0)], 0.0).is_err());
    }

    #[test]
    fn lookup_wraps_around_the_day() {
        let s = MobilitySchedule::new(vec![seg(0.0, 1), seg(3600.0, 2), seg(7200.0, 3)], 86_400.0).unwrap();
        assert_eq!(s.place_at(0.0), PlaceId(1));
        assert_eq!(s.place_at(3599.9), PlaceId(1));
        assert_eq!(s.place_at(4000.0), PlaceId(2));
        assert_eq!(s.place_at(7200.0), PlaceId(3));
        assert_eq!(s.place_at(86_400.0 + 4000.0), PlaceId(2));
        assert_eq!(s.place_at(-1.0), PlaceId(3));
    }

    proptest! {
        #[test]
        fn lookup_matches_linear_scan(
            gaps in prop::collection::vec(1.0f64..5000.0, 1..12),
            t in 0.0f64..200_000.0,
        ) {
            let mut starts = vec![0.0];
            for g in &gaps {
                let next = starts.last().unwrap() + g;
                starts.push(next);
            }
            let day = starts.pop().unwrap();
            let segments: Vec<DwellSegment> =
                starts.iter().enumerate().map(|(i, &s)| seg(s, i as u32)).collect();
            let sched = MobilitySchedule::new(segments.clone(), day).unwrap();
            let tod = t % day;
            let mut expected = segments[0].place;
            for s in &segments {
                if s.start_s <= tod {
                    expected = s.place;
                }
            }
            prop_assert_eq!(sched.place_at(t), expected);
        }
    }
}
