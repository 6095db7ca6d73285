//! Synthetic filament scenes with known ground-truth curves.
//!
//! Geometry lives in the local `(lat, lon)` radian chart; noise is isotropic
//! Gaussian in that chart.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::GeoPointSet;
use crate::error::{FilamentError, Result};
use crate::geo::{Distance, GeoPoint};

/// Noiseless curve underlying a scene. Coordinates are `[lat, lon]` radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilamentShape {
    LineSegment {
        start: [f64; 2],
        end: [f64; 2],
    },
    /// Arc from `start_angle` to `end_angle` (radians, counter-clockwise,
    /// measured from the +lon axis). A span of `2 pi` or more is a full circle.
    CircleArc {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
    /// Isotropic blob; `noise_sigma` is its spread.
    GaussianCloud {
        center: [f64; 2],
    },
    /// Two perpendicular segments crossing at `center`, the first rotated by
    /// `angle` from the +lon axis.
    Cross {
        center: [f64; 2],
        half_length: f64,
        angle: f64,
    },
}

impl FilamentShape {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FilamentShape::LineSegment { .. } => "line-segment",
            FilamentShape::CircleArc { .. } => "circle-arc",
            FilamentShape::GaussianCloud { .. } => "gaussian-cloud",
            FilamentShape::Cross { .. } => "cross",
        }
    }

    /// Full circle of radius `radius` around `center`.
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        FilamentShape::CircleArc { center, radius, start_angle: 0.0, end_angle: TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilamentSpec {
    #[serde(flatten)]
    pub shape: FilamentShape,
    pub noise_sigma: f64,
    pub n: usize,
    pub seed: u64,
}

impl FilamentSpec {
    fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(FilamentError::param(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if self.n == 0 {
            return Err(FilamentError::param("scene must contain at least one point"));
        }
        match self.shape {
            FilamentShape::CircleArc { radius, start_angle, end_angle, .. } => {
                if radius.is_nan() || radius <= 0.0 || end_angle.is_nan() || end_angle <= start_angle {
                    return Err(FilamentError::param("circle arc needs radius > 0 and end_angle > start_angle"));
                }
            }
            FilamentShape::Cross { half_length, .. } if half_length.is_nan() || half_length <= 0.0 => {
                return Err(FilamentError::param("cross needs half_length > 0"));
            }
            _ => {}
        }
        Ok(())
    }
}

fn segment_point(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn cross_arms(center: [f64; 2], half_length: f64, angle: f64) -> [([f64; 2], [f64; 2]); 2] {
    let arm = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let d = [half_length * s, half_length * c];
        ([center[0] - d[0], center[1] - d[1]], [center[0] + d[0], center[1] + d[1]])
    };
    [arm(angle), arm(angle + 0.5 * PI)]
}

/// Draws `n` noisy points from the scene, deterministically in `seed`.
pub fn generate(spec: &FilamentSpec) -> Result<GeoPointSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| FilamentError::param(e.to_string()))?;
    let mut points = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let base = match spec.shape {
            FilamentShape::LineSegment { start, end } => segment_point(start, end, rng.random::<f64>()),
            FilamentShape::CircleArc { center, radius, start_angle, end_angle } => {
                let t = start_angle + rng.random::<f64>() * (end_angle - start_angle).min(TAU);
                [center[0] + radius * t.sin(), center[1] + radius * t.cos()]
            }
            FilamentShape::GaussianCloud { center } => center,
            FilamentShape::Cross { center, half_length, angle } => {
                let arms = cross_arms(center, half_length, angle);
                let (a, b) = arms[usize::from(rng.random::<bool>())];
                segment_point(a, b, rng.random::<f64>())
            }
        };
        let lat = base[0] + noise.sample(&mut rng);
        let lon = base[1] + noise.sample(&mut rng);
        points.push(GeoPoint::from_radians(lat, lon)?);
    }
    GeoPointSet::new(points)
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0) };
    let q = segment_point(a, b, t);
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Perpendicular chart distance from `p` to the scene's noiseless curve.
pub fn true_curve_distance(p: GeoPoint, shape: &FilamentShape) -> Result<Distance> {
    let x = [p.lat_rad(), p.lon_rad()];
    let d = match *shape {
        FilamentShape::LineSegment { start, end } => segment_distance(x, start, end),
        FilamentShape::CircleArc { center, radius, start_angle, end_angle } => {
            let dy = x[0] - center[0];
            let dx = x[1] - center[1];
            let rho = dx.hypot(dy);
            let span = end_angle - start_angle;
            let theta = dy.atan2(dx);
            let within = span >= TAU || (theta - start_angle).rem_euclid(TAU) <= span;
            if within {
                (rho - radius).abs()
            } else {
                let end_pt = |t: f64| [center[0] + radius * t.sin(), center[1] + radius * t.cos()];
                let (a, b) = (end_pt(start_angle), end_pt(end_angle));
                (x[0] - a[0]).hypot(x[1] - a[1]).min((x[0] - b[0]).hypot(x[1] - b[1]))
            }
        }
        FilamentShape::Cross { center, half_length, angle } => cross_arms(center, half_length, angle)
            .iter()
            .map(|&(a, b)| segment_distance(x, a, b))
            .fold(f64::INFINITY, f64::min),
        FilamentShape::GaussianCloud { .. } => return Err(FilamentError::UnsupportedKind("gaussian-cloud")),
    };
    Distance::from_radians(d)
}
