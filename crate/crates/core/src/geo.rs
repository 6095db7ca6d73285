//! Great-circle distances on a spherical Earth.
//!
//! Every distance is stored internally as a central angle in radians on the
//! unit sphere; miles and kilometers are views obtained through the fixed
//! mean Earth radius.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FilamentError, Result};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3_958.761_3;
/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6_371.008_8;

/// Slack tolerated on the arccos argument before it counts as a numerical fault.
const ACOS_SLACK: f64 = 1e-9;

/// A latitude/longitude pair in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    /// Builds a point from radian coordinates.
    pub fn from_radians(lat: f64, lon: f64) -> Result<Self> {
        Self::new(lat.to_degrees(), lon.to_degrees())
    }

    pub fn validate(&self) -> Result<()> {
        check_range("lat", self.lat, -90.0, 90.0)?;
        check_range("lon", self.lon, -180.0, 180.0)
    }

    pub fn lat_rad(&self) -> f64 {
        degrees_to_radians(self.lat)
    }

    pub fn lon_rad(&self) -> f64 {
        degrees_to_radians(self.lon)
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

fn check_range(field: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(FilamentError::Domain { field, value, min, max })
    }
}

/// Non-negative great-circle distance, stored as a unit-sphere central angle.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Distance(f64);

impl Distance {
    pub const ZERO: Distance = Distance(0.0);

    pub fn from_radians(rad: f64) -> Result<Self> {
        if rad.is_finite() && rad >= 0.0 {
            Ok(Distance(rad))
        } else {
            Err(FilamentError::param(format!("distance must be finite and >= 0, got {rad}")))
        }
    }

    pub fn from_miles(miles: f64) -> Result<Self> {
        Self::from_radians(miles_to_radians(miles))
    }

    pub fn from_kilometers(km: f64) -> Result<Self> {
        Self::from_radians(km / EARTH_RADIUS_KM)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn miles(self) -> f64 {
        radians_to_miles(self.0)
    }

    pub fn kilometers(self) -> f64 {
        self.0 * EARTH_RADIUS_KM
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

pub fn degrees_to_radians(deg: f64) -> f64 {
    deg * (PI / 180.0)
}

pub fn miles_to_radians(miles: f64) -> f64 {
    miles / EARTH_RADIUS_MILES
}

pub fn radians_to_miles(rad: f64) -> f64 {
    rad * EARTH_RADIUS_MILES
}

/// `hav(x) = sin^2(x / 2)`.
#[inline]
pub fn hav(angle: f64) -> f64 {
    let s = (0.5 * angle).sin();
    s * s
}

/// Haversine argument `hav(dlat) + cos(lat_a) cos(lat_b) hav(dlon)` for radian
/// inputs with precomputed latitude cosines.
#[inline]
pub(crate) fn hav_term(lat_a: f64, lon_a: f64, cos_a: f64, lat_b: f64, lon_b: f64, cos_b: f64) -> f64 {
    hav((lat_b - lat_a).abs()) + cos_a * cos_b * hav((lon_b - lon_a).abs())
}

/// Central angle from a haversine argument.
#[inline]
pub(crate) fn central_angle_from_hav(h: f64) -> f64 {
    2.0 * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Great-circle distance between two points via the haversine formula.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> Result<Distance> {
    a.validate()?;
    b.validate()?;
    let (la, lb) = (a.lat_rad(), b.lat_rad());
    let h = hav_term(la, a.lon_rad(), la.cos(), lb, b.lon_rad(), lb.cos());
    Ok(Distance(central_angle_from_hav(h)))
}

/// Central angle in radians through the spherical law of cosines.
///
/// Poorly conditioned for short separations; kept as an independent
/// cross-check on [`haversine`].
pub fn central_angle_law_of_cosines(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (la, lb) = (a.lat_rad(), b.lat_rad());
    let dlon = (b.lon_rad() - a.lon_rad()).abs();
    let arg = la.sin() * lb.sin() + la.cos() * lb.cos() * dlon.cos();
    if !(-1.0 - ACOS_SLACK..=1.0 + ACOS_SLACK).contains(&arg) {
        return Err(FilamentError::Internal(format!("law-of-cosines argument {arg} outside [-1, 1]")));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}
