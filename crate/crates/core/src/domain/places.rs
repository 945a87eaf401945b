use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::geo::latitude_span_deg;
use super::{haversine_distance, DomainError, GeoPoint, LocationClassId, PlaceId, VariantId, OPEN_AREA};

/// A named spot with a class and an effective radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: PlaceId,
    #[serde(default)]
    pub name: String,
    pub point: GeoPoint,
    pub class: LocationClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantId>,
    pub radius_m: f64,
}

/// Places searchable by coordinate.
///
/// Places are kept sorted by latitude so a lookup only inspects the band of
/// latitudes that could possibly contain the query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIndex", into = "RawIndex")]
pub struct LocationIndex {
    places: Vec<Place>,
    by_lat: Vec<usize>,
    max_radius_m: f64,
    default_class: LocationClassId,
}

#[derive(Serialize, Deserialize)]
struct RawIndex {
    places: Vec<Place>,
    #[serde(default = "default_class")]
    default_class: LocationClassId,
}

fn default_class() -> LocationClassId {
    OPEN_AREA
}

impl TryFrom<RawIndex> for LocationIndex {
    type Error = DomainError;

    fn try_from(raw: RawIndex) -> Result<Self, DomainError> {
        LocationIndex::new(raw.places, raw.default_class)
    }
}

impl From<LocationIndex> for RawIndex {
    fn from(ix: LocationIndex) -> Self {
        RawIndex { places: ix.places, default_class: ix.default_class }
    }
}

impl LocationIndex {
    pub fn new(mut places: Vec<Place>, default_class: LocationClassId) -> Result<Self, DomainError> {
        if places.is_empty() {
            return Err(DomainError::NoPlaces);
        }
        places.sort_by_key(|p| p.id);
        for w in places.windows(2) {
            if w[0].id == w[1].id {
                return Err(DomainError::DuplicatePlace(w[0].id));
            }
        }
        let mut max_radius_m: f64 = 0.0;
        for p in &places {
            if !(p.radius_m > 0.0) || !p.radius_m.is_finite() {
                return Err(DomainError::PlaceRadius(p.id));
            }
            max_radius_m = max_radius_m.max(p.radius_m);
        }
        let mut by_lat: Vec<usize> = (0..places.len()).collect();
        by_lat.sort_by(|&a, &b| places[a].point.lat().total_cmp(&places[b].point.lat()));
        Ok(LocationIndex { places, by_lat, max_radius_m, default_class })
    }

    /// Places ordered by id.
    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn place(&self, id: PlaceId) -> Option<&Place> {
        self.places.binary_search_by_key(&id, |p| p.id).ok().map(|i| &self.places[i])
    }

    pub fn default_class(&self) -> LocationClassId {
        self.default_class
    }

    /// Nearest place whose radius contains `p`; ties go to the smaller id.
    pub fn containing_place(&self, p: GeoPoint) -> Option<&Place> {
        let span = latitude_span_deg(self.max_radius_m) * (1.0 + 1e-9) + 1e-12;
        let lo = p.lat() - span;
        let hi = p.lat() + span;
        let start = self.by_lat.partition_point(|&i| self.places[i].point.lat() < lo);
        let mut best: Option<(f64, &Place)> = None;
        for &i in &self.by_lat[start..] {
            let place = &self.places[i];
            if place.point.lat() > hi {
                break;
            }
            let d = haversine_distance(p, place.point);
            if d > place.radius_m {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bp)) => match d.total_cmp(&bd) {
                    Ordering::Less => true,
                    Ordering::Equal => place.id < bp.id,
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((d, place));
            }
        }
        best.map(|(_, place)| place)
    }
}

/// Class of the nearest place containing `p`, else the index's default class.
pub fn classify_location(p: GeoPoint, index: &LocationIndex) -> LocationClassId {
    index.containing_place(p).map_or(index.default_class, |pl| pl.class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn place(id: u32, lat: f64, lon: f64, class: u16, radius_m: f64) -> Place {
        Place {
            id: PlaceId(id),
            name: String::new(),
            point: GeoPoint::new(lat, lon).unwrap(),
            class: LocationClassId(class),
            variant: None,
            radius_m,
        }
    }

    fn brute_force(p: GeoPoint, places: &[Place], default: LocationClassId) -> LocationClassId {
        let mut best: Option<(f64, u32, LocationClassId)> = None;
        for pl in places {
            let d = haversine_distance(p, pl.point);
            if d <= pl.radius_m {
                let cand = (d, pl.id.0, pl.class);
                best = match best {
                    Some(b) if (b.0, b.1) <= (cand.0, cand.1) => Some(b),
                    _ => Some(cand),
                };
            }
        }
        best.map_or(default, |b| b.2)
    }

    #[test]
    fn center_of_school_is_school() {
        let ix = LocationIndex::new(vec![place(1, 52.0, 21.0, 3, 200.0)], OPEN_AREA).unwrap();
        assert_eq!(classify_location(GeoPoint::new(52.0, 21.0).unwrap(), &ix), LocationClassId(3));
    }

    #[test]
    fn outside_all_radii_is_open_area() {
        let ix = LocationIndex::new(vec![place(1, 52.0, 21.0, 3, 200.0)], OPEN_AREA).unwrap();
        assert_eq!(classify_location(GeoPoint::new(52.1, 21.0).unwrap(), &ix), OPEN_AREA);
    }

    #[test]
    fn equidistant_overlap_goes_to_smaller_id() {
        let a = GeoPoint::new(52.0, 21.0).unwrap();
        let west = a.offset(0.0, -100.0);
        let east = a.offset(0.0, 100.0);
        let places = vec![place(7, east.lat(), east.lon(), 6, 300.0), place(4, west.lat(), west.lon(), 5, 300.0)];
        let ix = LocationIndex::new(places.clone(), OPEN_AREA).unwrap();
        let q = GeoPoint::new(52.0, 21.0).unwrap();
        let d_w = haversine_distance(q, west);
        let d_e = haversine_distance(q, east);
        // The offsets are symmetric only up to rounding; compare against the
        // scan so the expected class follows the same distance ordering.
        let expected = brute_force(q, &places, OPEN_AREA);
        assert_eq!(classify_location(q, &ix), expected);
        if d_w == d_e {
            assert_eq!(expected, LocationClassId(5));
        }
        // Exactly equal distances: same coordinates, different ids.
        let twins = vec![place(9, 52.0, 21.0, 8, 50.0), place(3, 52.0, 21.0, 2, 50.0)];
        let ix = LocationIndex::new(twins, OPEN_AREA).unwrap();
        assert_eq!(classify_location(q, &ix), LocationClassId(2));
    }

    #[test]
    fn rejects_bad_indexes() {
        assert_eq!(LocationIndex::new(vec![], OPEN_AREA), Err(DomainError::NoPlaces));
        assert_eq!(
            LocationIndex::new(vec![place(1, 0.0, 0.0, 1, 0.0)], OPEN_AREA),
            Err(DomainError::PlaceRadius(PlaceId(1)))
        );
        assert_eq!(
            LocationIndex::new(vec![place(1, 0.0, 0.0, 1, 5.0), place(1, 1.0, 0.0, 1, 5.0)], OPEN_AREA),
            Err(DomainError::DuplicatePlace(PlaceId(1)))
        );
    }

    proptest! {
        #[test]
        fn agrees_with_linear_scan(
            raw in prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05, 0u16..12, 50.0f64..3000.0), 1..40),
            queries in prop::collection::vec((-0.06f64..0.06, -0.06f64..0.06), 1..30),
        ) {
            let places: Vec<Place> = raw
                .iter()
                .enumerate()
                .map(|(i, &(dlat, dlon, c, r))| place(i as u32, 52.0 + dlat, 21.0 + dlon, c, r))
                .collect();
            let ix = LocationIndex::new(places.clone(), OPEN_AREA).unwrap();
            for (dlat, dlon) in queries {
                let q = GeoPoint::new(52.0 + dlat, 21.0 + dlon).unwrap();
                prop_assert_eq!(classify_location(q, &ix), brute_force(q, &places, OPEN_AREA));
            }
        }

        #[test]
        fn haversine_is_symmetric(a in (-90.0f64..=90.0, -180.0f64..180.0), b in (-90.0f64..=90.0, -180.0f64..180.0)) {
            let a = GeoPoint::new(a.0, a.1).unwrap();
            let b = GeoPoint::new(b.0, b.1).unwrap();
            let ab = haversine_distance(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, haversine_distance(b, a));
        }

        #[test]
        fn triangle_inequality(
            a in (-90.0f64..=90.0, -180.0f64..180.0),
            b in (-90.0f64..=90.0, -180.0f64..180.0),
            c in (-90.0f64..=90.0, -180.0f64..180.0),
        ) {
            let a = GeoPoint::new(a.0, a.1).unwrap();
            let b = GeoPoint::new(b.0, b.1).unwrap();
            let c = GeoPoint::new(c.0, c.1).unwrap();
            let ac = haversine_distance(a, c);
            let via = haversine_distance(a, b) + haversine_distance(b, c);
            prop_assert!(ac <= via * (1.0 + 1e-6) + 1e-6, "{} > {}", ac, via);
        }
    }
}
