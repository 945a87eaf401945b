//! Spherical geometry on decimal-degree coordinates.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Mean earth radius used for every distance in the crate, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A validated WGS84-style coordinate in decimal degrees.
///
/// Latitude lies in `[-90, 90]` and longitude in `[-180, 180)`; a longitude of
/// exactly `180` is folded onto `-180` so the antimeridian has one spelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = DomainError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, DomainError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(DomainError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(DomainError::Longitude(lon));
        }
        let lon = if lon == 180.0 { -180.0 } else { lon };
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Point reached by moving `north_m` meters along the meridian and
    /// `east_m` meters along the local parallel. Only meant for small offsets
    /// when laying out synthetic places; the result is clamped into range.
    pub fn offset(&self, north_m: f64, east_m: f64) -> GeoPoint {
        let dlat = north_m / EARTH_RADIUS_M * 180.0 / PI;
        let coslat = libm::cos(self.lat.to_radians()).max(1e-6);
        let dlon = east_m / (EARTH_RADIUS_M * coslat) * 180.0 / PI;
        let lat = (self.lat + dlat).clamp(-90.0, 90.0);
        let mut lon = self.lon + dlon;
        while lon >= 180.0 {
            lon -= 360.0;
        }
        while lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance in meters between two points (haversine form).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = libm::sin(dphi / 2.0);
    let s2 = libm::sin(dlambda / 2.0);
    let h = (s1 * s1 + libm::cos(phi1) * libm::cos(phi2) * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * libm::atan2(libm::sqrt(h), libm::sqrt(1.0 - h))
}

/// Upper bound, in degrees of latitude, of how far north or south a point
/// can lie while staying within `meters` of another point.
pub(crate) fn latitude_span_deg(meters: f64) -> f64 {
    meters / EARTH_RADIUS_M * 180.0 / PI
}
