//! Gaussian kernel density estimation on latitude/longitude data.
//!
//! Kernel distances are great-circle central angles. Gradients and Hessians
//! are taken with respect to `(lat, lon)` in radians, i.e. in the flat local
//! chart of the coordinates themselves.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FilamentError, Result};
use crate::geo::{central_angle_from_hav, hav, hav_term, GeoPoint, EARTH_RADIUS_MILES};
use crate::linalg::Sym2;

/// Below this haversine argument the squared-angle derivatives switch to
/// their Taylor series to avoid cancellation.
const SERIES_CUTOFF: f64 = 1e-3;

/// Ordered, non-empty collection of valid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeoPoint>", into = "Vec<GeoPoint>")]
pub struct GeoPointSet(Vec<GeoPoint>);

impl GeoPointSet {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(FilamentError::param("point set must contain at least one point"));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(GeoPointSet(points))
    }

    pub fn from_degrees(coords: &[(f64, f64)]) -> Result<Self> {
        coords.iter().map(|&(lat, lon)| GeoPoint::new(lat, lon)).collect::<Result<Vec<_>>>().and_then(Self::new)
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GeoPoint> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<GeoPoint> {
        self.0
    }
}

impl TryFrom<Vec<GeoPoint>> for GeoPointSet {
    type Error = FilamentError;

    fn try_from(v: Vec<GeoPoint>) -> Result<Self> {
        GeoPointSet::new(v)
    }
}

impl From<GeoPointSet> for Vec<GeoPoint> {
    fn from(s: GeoPointSet) -> Self {
        s.0
    }
}

/// Kernel bandwidth, stored as a unit-sphere angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn from_radians(rad: f64) -> Result<Self> {
        if rad.is_finite() && rad > 0.0 {
            Ok(Bandwidth(rad))
        } else {
            Err(FilamentError::param(format!("bandwidth must be positive and finite, got {rad}")))
        }
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::from_radians(deg.to_radians())
    }

    pub fn from_miles(miles: f64) -> Result<Self> {
        Self::from_radians(miles / EARTH_RADIUS_MILES)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    pub fn miles(self) -> f64 {
        self.0 * EARTH_RADIUS_MILES
    }
}

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Average great-circle distance from each point to its `k` nearest
/// neighbors (self excluded), averaged over the data set.
pub fn knn_bandwidth(data: &GeoPointSet, k: usize) -> Result<Bandwidth> {
    let n = data.len();
    if k == 0 || k >= n {
        return Err(FilamentError::param(format!(
            "neighbors must satisfy 1 <= k <= {} for {} points, got {k}",
            n.saturating_sub(1),
            n
        )));
    }
    let pts = PreparedPoints::new(data.points());

    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| pts.angle(i, j)).collect();
            dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            let mut nearest = dists[..k].to_vec();
            nearest.sort_unstable_by(f64::total_cmp);
            nearest.iter().sum::<f64>()
        })
        .collect();

    let total: f64 = per_point.iter().sum();
    let avg = total / (k as f64 * n as f64);
    if avg <= 0.0 {
        return Err(FilamentError::DegenerateData(
            "k-nearest-neighbor distances are all zero; bandwidth would vanish".into(),
        ));
    }
    Bandwidth::from_radians(avg)
}

/// Radian coordinates with cached latitude cosines.
#[derive(Debug, Clone)]
struct PreparedPoints {
    lat: Vec<f64>,
    lon: Vec<f64>,
    cos_lat: Vec<f64>,
}

impl PreparedPoints {
    fn new(points: &[GeoPoint]) -> Self {
        let lat: Vec<f64> = points.iter().map(GeoPoint::lat_rad).collect();
        let lon = points.iter().map(GeoPoint::lon_rad).collect();
        let cos_lat = lat.iter().map(|l| l.cos()).collect();
        PreparedPoints { lat, lon, cos_lat }
    }

    fn angle(&self, i: usize, j: usize) -> f64 {
        central_angle_from_hav(hav_term(
            self.lat[i],
            self.lon[i],
            self.cos_lat[i],
            self.lat[j],
            self.lon[j],
            self.cos_lat[j],
        ))
    }

    fn len(&self) -> usize {
        self.lat.len()
    }
}

/// Squared central angle `u(h) = (2 asin sqrt h)^2` and its first two
/// derivatives with respect to the haversine argument `h`.
fn squared_angle_derivs(h: f64) -> (f64, f64, f64) {
    let h = h.clamp(0.0, 1.0);
    if h < SERIES_CUTOFF {
        // 4 asin^2(sqrt h) = 4 (h + h^2/3 + 8h^3/45 + 4h^4/35 + 128h^5/1575 + ...)
        let u = 4.0 * h * (1.0 + h * (1.0 / 3.0 + h * (8.0 / 45.0 + h * (4.0 / 35.0 + h * 128.0 / 1575.0))));
        let du = 4.0 * (1.0 + h * (2.0 / 3.0 + h * (8.0 / 15.0 + h * (16.0 / 35.0 + h * 128.0 / 315.0))));
        let d2u = 4.0 * (2.0 / 3.0 + h * (16.0 / 15.0 + h * (48.0 / 35.0 + h * 512.0 / 315.0)));
        (u, du, d2u)
    } else {
        let d = 2.0 * h.sqrt().asin();
        let q = h * (1.0 - h);
        let du = 2.0 * d / q.sqrt();
        let d2u = 2.0 / q - d * (1.0 - 2.0 * h) / (q * q.sqrt());
        (d * d, du, d2u)
    }
}

/// Kernel-weighted moments used by one constrained mean-shift step.
#[derive(Debug, Clone, Copy)]
pub struct ShiftMoments {
    /// Sum of unnormalized Gaussian weights.
    pub weight_sum: f64,
    /// Weighted mean of the data in radians, `(lat, lon)`.
    pub weighted_mean: [f64; 2],
    /// Kernel-weighted Hessian in the flat chart, scaled like the density.
    pub hessian: Sym2,
}

/// Data set plus bandwidth; answers density, gradient and Hessian queries.
#[derive(Debug, Clone)]
pub struct DensityModel {
    data: GeoPointSet,
    prepared: PreparedPoints,
    bandwidth: Bandwidth,
    norm: f64,
}

impl DensityModel {
    pub fn new(data: GeoPointSet, bandwidth: Bandwidth) -> Self {
        let prepared = PreparedPoints::new(data.points());
        let beta = bandwidth.radians();
        let norm = 1.0 / (data.len() as f64 * 2.0 * PI * beta * beta);
        DensityModel { data, prepared, bandwidth, norm }
    }

    pub fn data(&self) -> &GeoPointSet {
        &self.data
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    /// Gaussian KDE at `x`.
    pub fn kde(&self, x: GeoPoint) -> f64 {
        self.kde_rad(x.lat_rad(), x.lon_rad())
    }

    pub(crate) fn kde_rad(&self, lat: f64, lon: f64) -> f64 {
        let inv_two_beta_sq = 0.5 / (self.bandwidth.0 * self.bandwidth.0);
        let cos_lat = lat.cos();
        let p = &self.prepared;
        let mut sum = 0.0;
        for j in 0..p.len() {
            let angle = central_angle_from_hav(hav_term(lat, lon, cos_lat, p.lat[j], p.lon[j], p.cos_lat[j]));
            sum += (-angle * angle * inv_two_beta_sq).exp();
        }
        self.norm * sum
    }

    /// Densities for many points, evaluated in parallel with fixed per-point
    /// summation order.
    pub fn kde_many(&self, xs: &[GeoPoint]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.kde(x)).collect()
    }

    /// Exact gradient of [`kde`](Self::kde) with respect to `(lat, lon)` radians.
    pub fn kde_gradient(&self, x: GeoPoint) -> [f64; 2] {
        let (g, _) = self.derivatives(x.lat_rad(), x.lon_rad(), false);
        g
    }

    /// Exact Hessian of [`kde`](Self::kde) with respect to `(lat, lon)` radians.
    pub fn kde_hessian(&self, x: GeoPoint) -> Sym2 {
        let (_, h) = self.derivatives(x.lat_rad(), x.lon_rad(), true);
        h
    }

    fn derivatives(&self, lat: f64, lon: f64, want_hessian: bool) -> ([f64; 2], Sym2) {
        let beta_sq = self.bandwidth.0 * self.bandwidth.0;
        let inv_two_beta_sq = 0.5 / beta_sq;
        let (sin_lat, cos_lat) = lat.sin_cos();
        let p = &self.prepared;

        let mut grad = [0.0; 2];
        let mut hess = Sym2::default();
        for j in 0..p.len() {
            let dlat = lat - p.lat[j];
            let dlon = lon - p.lon[j];
            let cj = p.cos_lat[j];
            let hav_dlon = hav(dlon);
            let (sin_dlat, cos_dlat) = dlat.sin_cos();
            let (sin_dlon, cos_dlon) = dlon.sin_cos();
            let h = hav(dlat) + cos_lat * cj * hav_dlon;

            let (u, du, d2u) = squared_angle_derivs(h);
            let k = (-u * inv_two_beta_sq).exp();
            if k == 0.0 {
                continue;
            }
            let dh = [0.5 * sin_dlat - sin_lat * cj * hav_dlon, 0.5 * cos_lat * cj * sin_dlon];
            let grad_u = [du * dh[0], du * dh[1]];
            let coef = -k * inv_two_beta_sq;
            grad[0] += coef * grad_u[0];
            grad[1] += coef * grad_u[1];

            if want_hessian {
                let d2h = Sym2::new(
                    0.5 * cos_dlat - cos_lat * cj * hav_dlon,
                    -0.5 * sin_lat * cj * sin_dlon,
                    0.5 * cos_lat * cj * cos_dlon,
                );
                let hess_u = Sym2::outer(dh).scale(d2u).add(&d2h.scale(du));
                let term = Sym2::outer(grad_u).scale(k * inv_two_beta_sq * inv_two_beta_sq).add(&hess_u.scale(coef));
                hess = hess.add(&term);
            }
        }
        ([self.norm * grad[0], self.norm * grad[1]], hess.scale(self.norm))
    }

    /// Kernel-weighted Hessian `C * sum_j w_j (mu_j mu_j^T - I / beta^2)` with
    /// `mu_j = (x - theta_j) / beta^2` in the flat chart and great-circle
    /// kernel weights `w_j`; the matrix that steers constrained mean shift.
    pub fn ridge_hessian(&self, x: GeoPoint) -> Sym2 {
        self.shift_moments(x.lat_rad(), x.lon_rad()).hessian
    }

    /// Weight sum, weighted mean and kernel-weighted Hessian at a radian position.
    pub fn shift_moments(&self, lat: f64, lon: f64) -> ShiftMoments {
        let beta_sq = self.bandwidth.0 * self.bandwidth.0;
        let inv_beta_sq = 1.0 / beta_sq;
        let inv_two_beta_sq = 0.5 * inv_beta_sq;
        let cos_lat = lat.cos();
        let p = &self.prepared;

        let mut w_sum = 0.0;
        let mut w_lat = 0.0;
        let mut w_lon = 0.0;
        let mut m_aa = 0.0;
        let mut m_ab = 0.0;
        let mut m_bb = 0.0;
        for j in 0..p.len() {
            let angle = central_angle_from_hav(hav_term(lat, lon, cos_lat, p.lat[j], p.lon[j], p.cos_lat[j]));
            let w = (-angle * angle * inv_two_beta_sq).exp();
            if w == 0.0 {
                continue;
            }
            let mu0 = (lat - p.lat[j]) * inv_beta_sq;
            let mu1 = (lon - p.lon[j]) * inv_beta_sq;
            w_sum += w;
            w_lat += w * p.lat[j];
            w_lon += w * p.lon[j];
            m_aa += w * mu0 * mu0;
            m_ab += w * mu0 * mu1;
            m_bb += w * mu1 * mu1;
        }
        let diag = w_sum * inv_beta_sq;
        let hessian = Sym2::new(m_aa - diag, m_ab, m_bb - diag).scale(self.norm);
        let weighted_mean = if w_sum > 0.0 { [w_lat / w_sum, w_lon / w_sum] } else { [f64::NAN, f64::NAN] };
        ShiftMoments { weight_sum: w_sum, weighted_mean, hessian }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(coords: &[(f64, f64)]) -> GeoPointSet {
        GeoPointSet::from_degrees(coords).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, lat0: f64, lon0: f64, spread: f64) -> GeoPointSet {
        let pts = (0..n)
            .map(|_| {
                GeoPoint::new(lat0 + rng.random_range(-spread..spread), lon0 + rng.random_range(-spread..spread))
                    .unwrap()
            })
            .collect();
        GeoPointSet::new(pts).unwrap()
    }

    #[test]
    fn point_set_rejects_empty_and_invalid() {
        assert!(GeoPointSet::new(vec![]).is_err());
        assert!(GeoPointSet::from_degrees(&[(0.0, 0.0), (95.0, 0.0)]).is_err());
    }

    #[test]
    fn bandwidth_two_points_is_their_distance() {
        let data = set(&[(41.88, -87.63), (41.90, -87.65)]);
        let bw = knn_bandwidth(&data, 1).unwrap();
        let d = haversine(data.points()[0], data.points()[1]).unwrap();
        assert!((bw.radians() - d.radians()).abs() < 1e-18);
    }

    #[test]
    fn bandwidth_matches_sorted_matrix_oracle() {
        let data = set(&[(41.80, -87.60), (41.83, -87.71), (41.95, -87.64), (41.77, -87.69), (41.88, -87.62)]);
        let n = data.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut row: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| haversine(data.points()[i], data.points()[j]).unwrap().radians())
                .collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            total += row[0] + row[1];
        }
        let oracle = total / (2.0 * n as f64);
        let bw = knn_bandwidth(&data, 2).unwrap();
        assert!(((bw.radians() - oracle) / oracle).abs() < 1e-14);
    }

    #[test]
    fn bandwidth_errors() {
        let data = set(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(knn_bandwidth(&data, 2), Err(FilamentError::DegenerateData(_))));
        assert!(matches!(knn_bandwidth(&data, 0), Err(FilamentError::Parameter(_))));
        assert!(matches!(knn_bandwidth(&data, 3), Err(FilamentError::Parameter(_))));
        assert!(Bandwidth::from_radians(0.0).is_err());
        assert!(Bandwidth::from_radians(f64::INFINITY).is_err());
    }

    #[test]
    fn bandwidth_nondecreasing_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_cloud(&mut rng, 40, 41.8, -87.7, 0.1);
        let mut last = 0.0;
        for k in 1..data.len() {
            let b = knn_bandwidth(&data, k).unwrap().radians();
            assert!(b >= last * (1.0 - 1e-14), "k={k}");
            last = b;
        }
    }

    #[test]
    fn single_point_peak_value() {
        let data = set(&[(41.9, -87.6)]);
        let bw = Bandwidth::from_radians(0.001).unwrap();
        let model = DensityModel::new(data.clone(), bw);
        let peak = model.kde(data.points()[0]);
        let expected = 1.0 / (2.0 * PI * 1e-6);
        assert!(((peak - expected) / expected).abs() < 1e-14);
        assert_eq!(model.kde_gradient(data.points()[0]), [0.0, 0.0]);
        let e = model.kde_hessian(data.points()[0]).eigen();
        assert!(e.max_value < 0.0);
    }

    #[test]
    fn density_decays_with_distance() {
        let model = DensityModel::new(set(&[(0.0, 0.0)]), Bandwidth::from_radians(0.01).unwrap());
        let mut last = f64::INFINITY;
        for step in 0..8 {
            let v = model.kde(GeoPoint::new(0.2 * step as f64, 0.0).unwrap());
            assert!(v >= 0.0 && v < last);
            last = v;
        }
        assert_eq!(model.kde(GeoPoint::new(0.0, 90.0).unwrap()), 0.0);
    }

    #[test]
    fn three_points_term_by_term() {
        let data = set(&[(0.0, 0.0), (0.0, 0.05), (0.03, 0.0)]);
        let model = DensityModel::new(data, Bandwidth::from_radians(0.001).unwrap());
        let x = GeoPoint::new(0.01, 0.02).unwrap();
        // 50-digit evaluation of the Gaussian KDE with great-circle distances.
        let expected = 141_683.982_232_498_23;
        let got = model.kde(x);
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn symmetric_pair_has_zero_gradient_at_midpoint() {
        let model = DensityModel::new(set(&[(0.0, -0.01), (0.0, 0.01)]), Bandwidth::from_radians(2e-4).unwrap());
        let g = model.kde_gradient(GeoPoint::new(0.0, 0.0).unwrap());
        let scale = model.kde(GeoPoint::new(0.0, 0.0).unwrap()) / 2e-4;
        assert!(g[0].abs() <= 1e-12 * scale && g[1].abs() <= 1e-12 * scale);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_cloud(&mut rng, 25, 41.8, -87.7, 0.05);
        let mut rev = data.points().to_vec();
        rev.reverse();
        let bw = Bandwidth::from_degrees(0.01).unwrap();
        let a = DensityModel::new(data, bw);
        let b = DensityModel::new(GeoPointSet::new(rev).unwrap(), bw);
        let x = GeoPoint::new(41.81, -87.69).unwrap();
        assert!(((a.kde(x) - b.kde(x)) / a.kde(x)).abs() < 1e-13);
    }

    #[test]
    fn squared_angle_series_matches_closed_form_at_cutoff() {
        let h = SERIES_CUTOFF;
        let d = 2.0 * h.sqrt().asin();
        let q = h * (1.0 - h);
        let closed = (d * d, 2.0 * d / q.sqrt(), 2.0 / q - d * (1.0 - 2.0 * h) / (q * q.sqrt()));
        let series = squared_angle_derivs(h * (1.0 - 1e-12));
        assert!(((closed.0 - series.0) / closed.0).abs() < 1e-11);
        assert!(((closed.1 - series.1) / closed.1).abs() < 1e-11);
        assert!(((closed.2 - series.2) / closed.2).abs() < 1e-9);
    }

    #[test]
    fn ridge_hessian_tracks_exact_hessian_near_equator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_cloud(&mut rng, 50, 0.0, 0.0, 0.02);
        let model = DensityModel::new(data, Bandwidth::from_degrees(0.01).unwrap());
        let x = GeoPoint::new(0.003, -0.002).unwrap();
        let exact = model.kde_hessian(x);
        let flat = model.ridge_hessian(x);
        let scale = exact.a.abs().max(exact.c.abs());
        for (e, f) in [(exact.a, flat.a), (exact.b, flat.b), (exact.c, flat.c)] {
            assert!((e - f).abs() < 1e-3 * scale, "{e} vs {f}");
        }
    }
}
