//! Thresholded subspace-constrained mean shift (SCMS).
//!
//! A uniform mesh over the data's bounding box is thinned to its
//! higher-density part, then every surviving mesh point is moved by the
//! mean-shift displacement projected onto the Hessian eigenvector with the
//! smallest eigenvalue (the ridge normal). Points freeze individually once
//! successive displacements stop changing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{knn_bandwidth, Bandwidth, DensityModel, GeoPointSet, DEFAULT_NEIGHBORS};
use crate::error::{FilamentError, Result};
use crate::geo::GeoPoint;
use crate::linalg::{norm, Sym2};
use crate::stats::quantile_sorted;

/// Relative eigenvalue gap below which the Hessian counts as isotropic.
const ISOTROPIC_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScmsConfig {
    /// Neighbors for the k-NN bandwidth.
    pub neighbors: usize,
    /// Fixed bandwidth; disables the k-NN estimate when set.
    pub bandwidth: Option<Bandwidth>,
    /// Convergence threshold on successive displacement change, in degrees.
    pub convergence: f64,
    /// Keep only the top `percentage` percent of ridge points by density.
    pub percentage: Option<f64>,
    /// Mesh size; defaults to the number of data points.
    pub mesh_size: Option<usize>,
    /// Quantile of mesh densities used as the retention threshold.
    pub threshold_quantile: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ScmsConfig {
    fn default() -> Self {
        ScmsConfig {
            neighbors: DEFAULT_NEIGHBORS,
            bandwidth: None,
            convergence: 0.01,
            percentage: None,
            mesh_size: None,
            threshold_quantile: 0.5,
            max_iterations: 500,
            seed: 0,
        }
    }
}

impl ScmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(FilamentError::param("neighbors must be at least 1"));
        }
        if !(self.convergence.is_finite() && self.convergence > 0.0) {
            return Err(FilamentError::param(format!("convergence must be positive, got {}", self.convergence)));
        }
        if let Some(p) = self.percentage {
            if !(0.0..=100.0).contains(&p) {
                return Err(FilamentError::param(format!("percentage must lie in [0, 100], got {p}")));
            }
        }
        if self.mesh_size == Some(0) {
            return Err(FilamentError::param("mesh size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold_quantile) {
            return Err(FilamentError::param(format!(
                "threshold quantile must lie in [0, 1], got {}",
                self.threshold_quantile
            )));
        }
        if self.max_iterations == 0 {
            return Err(FilamentError::param("max iterations must be at least 1"));
        }
        if let Some(bw) = self.bandwidth {
            Bandwidth::from_radians(bw.radians())?;
        }
        Ok(())
    }
}

/// Converged ridge points with their densities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RidgePointSet {
    pub points: Vec<GeoPoint>,
    /// Density at each point under the model that produced it.
    pub densities: Vec<f64>,
    /// `false` where the point hit the iteration cap before converging.
    pub converged: Vec<bool>,
}

impl RidgePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> RidgePointSet {
        let mut out = RidgePointSet::default();
        for i in (0..self.len()).filter(|&i| keep(i)) {
            out.points.push(self.points[i]);
            out.densities.push(self.densities[i]);
            out.converged.push(self.converged[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmsResult {
    pub ridges: RidgePointSet,
    /// Sweeps executed before every point froze, stranded, or hit the cap.
    pub iterations_run: usize,
    /// Updates applied to each thresholded mesh point, in mesh order.
    pub per_point_iterations: Vec<usize>,
    pub bandwidth_used: Bandwidth,
    pub threshold_used: f64,
    /// Mesh points removed by the density threshold.
    pub discarded_mesh_count: usize,
    /// Points dropped because their kernel weights underflowed.
    pub stranded_count: usize,
    /// Ridge points that never met the convergence criterion.
    pub unconverged_count: usize,
    /// Set when the percentile cut selected nothing.
    pub empty_cut_warning: bool,
}

/// Samples `mesh_size` points uniformly over the latitude/longitude bounding
/// box of `data`.
pub fn init_mesh(data: &GeoPointSet, mesh_size: usize, seed: u64) -> Result<GeoPointSet> {
    if mesh_size == 0 {
        return Err(FilamentError::param("mesh size must be at least 1"));
    }
    let (mut lat_min, mut lat_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lon_min, mut lon_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in data.iter() {
        lat_min = lat_min.min(p.lat);
        lat_max = lat_max.max(p.lat);
        lon_min = lon_min.min(p.lon);
        lon_max = lon_max.max(p.lon);
    }
    if lat_min == lat_max && lon_min == lon_max {
        return Err(FilamentError::DegenerateData("all data points coincide; bounding box has zero area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |lo: f64, hi: f64| if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let points = (0..mesh_size)
        .map(|_| {
            let lat = sample(lat_min, lat_max);
            let lon = sample(lon_min, lon_max);
            GeoPoint { lat, lon }
        })
        .collect();
    GeoPointSet::new(points)
}

/// Mesh points at or above the density quantile, plus the threshold itself.
pub fn threshold_mesh(mesh: &GeoPointSet, model: &DensityModel, threshold_quantile: f64) -> Result<(GeoPointSet, f64)> {
    if !(0.0..=1.0).contains(&threshold_quantile) {
        return Err(FilamentError::param(format!("threshold quantile must lie in [0, 1], got {threshold_quantile}")));
    }
    let densities = model.kde_many(mesh.points());
    let mut sorted = densities.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let tau = quantile_sorted(&sorted, threshold_quantile);
    let kept: Vec<GeoPoint> = mesh.iter().zip(&densities).filter(|(_, &d)| d >= tau).map(|(p, _)| *p).collect();
    if kept.is_empty() {
        return Err(FilamentError::ThresholdTooHigh { tau });
    }
    Ok((GeoPointSet::new(kept)?, tau))
}

/// Rank-one projector `v v^T` onto the Hessian eigenvector with the smallest
/// eigenvalue. When the two eigenvalues tie, the direction of `fallback` is
/// used instead (a plain mean-shift step); a zero fallback yields the zero
/// matrix.
pub fn ridge_projector(hessian: &Sym2, fallback: [f64; 2]) -> Sym2 {
    let e = hessian.eigen();
    let scale = e.min_value.abs().max(e.max_value.abs());
    let v = if e.max_value - e.min_value <= ISOTROPIC_GAP * scale {
        let n = norm(fallback);
        if n == 0.0 {
            return Sym2::default();
        }
        [fallback[0] / n, fallback[1] / n]
    } else {
        e.min_vector
    };
    Sym2::outer(v)
}

/// One constrained mean-shift step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScmsStep {
    pub new_point: GeoPoint,
    /// Projected displacement in radians, `(lat, lon)`.
    pub shift: [f64; 2],
}

/// Moves `point` by the projected mean-shift displacement.
///
/// Returns `None` when the point is stranded, i.e. every kernel weight
/// underflowed and no weighted mean exists.
pub fn scms_update(point: GeoPoint, model: &DensityModel) -> Option<ScmsStep> {
    let pos = [point.lat_rad(), point.lon_rad()];
    let shift = projected_shift(model, pos)?;
    let new_point = GeoPoint::from_radians(pos[0] + shift[0], pos[1] + shift[1]).ok()?;
    Some(ScmsStep { new_point, shift })
}

fn projected_shift(model: &DensityModel, pos: [f64; 2]) -> Option<[f64; 2]> {
    let m = model.shift_moments(pos[0], pos[1]);
    if m.weight_sum.is_nan() || m.weight_sum < f64::MIN_POSITIVE {
        return None;
    }
    let displacement = [m.weighted_mean[0] - pos[0], m.weighted_mean[1] - pos[1]];
    let l = ridge_projector(&m.hessian, displacement);
    Some(l.mul_vec(displacement))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Active,
    Converged,
    Stranded,
}

#[derive(Debug, Clone)]
struct Walker {
    pos: [f64; 2],
    last_shift: Option<[f64; 2]>,
    iterations: usize,
    status: Status,
}

impl Walker {
    fn step(&mut self, model: &DensityModel, tol_rad: f64) {
        let Some(shift) = projected_shift(model, self.pos) else {
            self.status = Status::Stranded;
            return;
        };
        self.pos[0] += shift[0];
        self.pos[1] += shift[1];
        self.iterations += 1;
        if let Some(prev) = self.last_shift {
            if norm([prev[0] - shift[0], prev[1] - shift[1]]) <= tol_rad {
                self.status = Status::Converged;
            }
        }
        self.last_shift = Some(shift);
    }
}

/// Full pipeline: bandwidth, mesh, threshold, iterate, optional percentile cut.
pub fn run_scms(data: &GeoPointSet, config: &ScmsConfig) -> Result<ScmsResult> {
    config.validate()?;
    if data.len() < 2 {
        return Err(FilamentError::param("at least two data points are required"));
    }
    let bandwidth = match config.bandwidth {
        Some(bw) => bw,
        None => knn_bandwidth(data, config.neighbors)?,
    };
    let model = DensityModel::new(data.clone(), bandwidth);
    let mesh_size = config.mesh_size.unwrap_or(data.len());
    let mesh = init_mesh(data, mesh_size, config.seed)?;
    let (kept, tau) = threshold_mesh(&mesh, &model, config.threshold_quantile)?;
    let discarded = mesh.len() - kept.len();

    let tol_rad = config.convergence.to_radians();
    let mut walkers: Vec<Walker> = kept
        .iter()
        .map(|p| Walker { pos: [p.lat_rad(), p.lon_rad()], last_shift: None, iterations: 0, status: Status::Active })
        .collect();

    let mut iterations_run = 0;
    while iterations_run < config.max_iterations && walkers.iter().any(|w| w.status == Status::Active) {
        iterations_run += 1;
        walkers.par_iter_mut().filter(|w| w.status == Status::Active).for_each(|w| w.step(&model, tol_rad));
    }

    let mut ridges = RidgePointSet::default();
    let mut stranded = 0;
    for w in &walkers {
        if w.status == Status::Stranded {
            stranded += 1;
            continue;
        }
        let p = GeoPoint::from_radians(w.pos[0], w.pos[1])
            .map_err(|e| FilamentError::Internal(format!("ridge point left the valid coordinate range: {e}")))?;
        ridges.points.push(p);
        ridges.converged.push(w.status == Status::Converged);
    }
    if ridges.is_empty() {
        return Err(FilamentError::EmptyResult);
    }
    ridges.densities = model.kde_many(&ridges.points);
    let unconverged = ridges.converged.iter().filter(|&&c| !c).count();

    let mut empty_cut_warning = false;
    if let Some(p) = config.percentage {
        let cut = percentile_cut(&ridges, p)?;
        empty_cut_warning = cut.gamma.is_none();
        ridges = cut.ridges;
    }

    Ok(ScmsResult {
        ridges,
        iterations_run,
        per_point_iterations: walkers.iter().map(|w| w.iterations).collect(),
        bandwidth_used: bandwidth,
        threshold_used: tau,
        discarded_mesh_count: discarded,
        stranded_count: stranded,
        unconverged_count: unconverged,
        empty_cut_warning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileCut {
    pub ridges: RidgePointSet,
    /// Density cut-off; `None` when the requested top set is empty.
    pub gamma: Option<f64>,
}

/// Keeps ridge points whose density reaches the smallest of the top
/// `floor(p * n / 100)` densities. Ties at the cut-off are all retained.
pub fn percentile_cut(ridges: &RidgePointSet, p: f64) -> Result<PercentileCut> {
    if !(0.0..=100.0).contains(&p) {
        return Err(FilamentError::param(format!("percentage must lie in [0, 100], got {p}")));
    }
    if ridges.is_empty() {
        return Err(FilamentError::EmptyRidges);
    }
    let top = ((p / 100.0) * ridges.len() as f64).floor() as usize;
    if top == 0 {
        return Ok(PercentileCut { ridges: RidgePointSet::default(), gamma: None });
    }
    let mut desc = ridges.densities.clone();
    desc.sort_unstable_by(|a, b| b.total_cmp(a));
    let gamma = desc[top - 1];
    Ok(PercentileCut { ridges: ridges.select(|i| ridges.densities[i] >= gamma), gamma: Some(gamma) })
}

/// Projector identities for a symmetric rank-one matrix; returns the worst
/// absolute deviation from `L = L^T`, `L^2 = L` and `trace(L) = 1`.
pub fn projector_defect(l: &Sym2) -> f64 {
    let m = l.as_array();
    let mut worst = (m[0][1] - m[1][0]).abs();
    for i in 0..2 {
        for j in 0..2 {
            let sq = m[i][0] * m[0][j] + m[i][1] * m[1][j];
            worst = worst.max((sq - m[i][j]).abs());
        }
    }
    worst.max((l.trace() - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Bandwidth;
    use rand_distr::{Distribution, Normal};

    fn line_scene(n: usize, noise: f64, seed: u64) -> GeoPointSet {
        // Horizontal segment along longitude at the equator, in radians.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).unwrap();
        let pts = (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(-0.01..0.01);
                let lat = normal.sample(&mut rng);
                let lon = t + normal.sample(&mut rng);
                GeoPoint::from_radians(lat, lon).unwrap()
            })
            .collect();
        GeoPointSet::new(pts).unwrap()
    }

    #[test]
    fn mesh_stays_in_box_and_is_reproducible() {
        let data = GeoPointSet::from_degrees(&[(41.0, -88.0), (42.0, -87.0), (41.5, -87.2)]).unwrap();
        let a = init_mesh(&data, 500, 7).unwrap();
        let b = init_mesh(&data, 500, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        for p in a.iter() {
            assert!((41.0..=42.0).contains(&p.lat) && (-88.0..=-87.0).contains(&p.lon));
        }
        assert_ne!(a, init_mesh(&data, 500, 8).unwrap());
    }

    #[test]
    fn mesh_rejects_degenerate_box() {
        let data = GeoPointSet::from_degrees(&[(41.0, -88.0), (41.0, -88.0)]).unwrap();
        assert!(matches!(init_mesh(&data, 10, 0), Err(FilamentError::DegenerateData(_))));
        assert!(init_mesh(&data, 0, 0).is_err());
    }

    #[test]
    fn threshold_quantiles() {
        let data = line_scene(200, 5e-4, 1);
        let model = DensityModel::new(data.clone(), Bandwidth::from_radians(1e-3).unwrap());
        let mesh = init_mesh(&data, 101, 3).unwrap();
        let densities = model.kde_many(mesh.points());
        let min = densities.iter().cloned().fold(f64::INFINITY, f64::min);

        let (all, tau) = threshold_mesh(&mesh, &model, 0.0).unwrap();
        assert_eq!(all.len(), 101);
        assert_eq!(tau, min);

        let (half, tau) = threshold_mesh(&mesh, &model, 0.5).unwrap();
        let mut sorted = densities.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = sorted.iter().filter(|&&d| d >= sorted[50]).count();
        assert_eq!(half.len(), expected);
        assert_eq!(half.len(), 51);
        assert!(model.kde_many(half.points()).iter().all(|&d| d >= tau));

        let mesh_even = init_mesh(&data, 100, 4).unwrap();
        assert_eq!(threshold_mesh(&mesh_even, &model, 0.5).unwrap().0.len(), 50);
        assert!(threshold_mesh(&mesh, &model, 1.5).is_err());
    }

    #[test]
    fn update_at_single_point_mode_is_still() {
        let data = GeoPointSet::from_degrees(&[(41.9, -87.6), (41.9, -87.6)]).unwrap();
        let model = DensityModel::new(data.clone(), Bandwidth::from_radians(1e-4).unwrap());
        let step = scms_update(data.points()[0], &model).unwrap();
        assert_eq!(step.shift, [0.0, 0.0]);
        assert_eq!(step.new_point, data.points()[0]);
    }

    #[test]
    fn stranded_point_is_signalled() {
        let data = GeoPointSet::from_degrees(&[(0.0, 0.0), (0.0, 0.001)]).unwrap();
        let model = DensityModel::new(data, Bandwidth::from_radians(1e-5).unwrap());
        assert!(scms_update(GeoPoint::new(10.0, 10.0).unwrap(), &model).is_none());
    }

    #[test]
    fn update_moves_toward_line() {
        let data = line_scene(2000, 1e-4, 5);
        let model = DensityModel::new(data, Bandwidth::from_radians(5e-4).unwrap());
        // Offsets stay inside the inflection band sqrt(beta^2 + noise^2) of the
        // smoothed cross-section, where the normal curvature is negative.
        for offset in [1e-4, -3e-4, 4.5e-4] {
            let p = GeoPoint::from_radians(offset, 0.002).unwrap();
            let step = scms_update(p, &model).unwrap();
            assert!(step.new_point.lat_rad().abs() < offset.abs(), "offset {offset}");
            // Displacement is essentially perpendicular to the line.
            assert!(step.shift[1].abs() < 0.2 * step.shift[0].abs());
        }
    }

    #[test]
    fn projector_is_idempotent() {
        let h = Sym2::new(-3.0, 1.2, -0.5);
        let m = [0.3, -0.7];
        let l = ridge_projector(&h, m);
        let once = l.mul_vec(m);
        let twice = l.mul_vec(once);
        assert!((once[0] - twice[0]).abs() < 1e-12 && (once[1] - twice[1]).abs() < 1e-12);
        assert!(projector_defect(&l) < 1e-12);
        let v = h.eigen().min_vector;
        let lv = l.mul_vec(v);
        assert!((lv[0] - v[0]).abs() < 1e-12 && (lv[1] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn isotropic_hessian_follows_displacement() {
        let l = ridge_projector(&Sym2::new(-2.0, 0.0, -2.0), [3.0, 4.0]);
        let s = l.mul_vec([3.0, 4.0]);
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 4.0).abs() < 1e-12);
        assert_eq!(ridge_projector(&Sym2::new(-1.0, 0.0, -1.0), [0.0, 0.0]), Sym2::default());
    }

    fn ridges(densities: &[f64]) -> RidgePointSet {
        RidgePointSet {
            points: (0..densities.len()).map(|i| GeoPoint { lat: i as f64, lon: 0.0 }).collect(),
            densities: densities.to_vec(),
            converged: vec![true; densities.len()],
        }
    }

    #[test]
    fn percentile_cut_cases() {
        let r = ridges(&[5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 10.0]);
        assert_eq!(percentile_cut(&r, 100.0).unwrap().ridges, r);
        let cut = percentile_cut(&r, 30.0).unwrap();
        let mut d = cut.ridges.densities.clone();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(d, vec![8.0, 9.0, 10.0]);
        assert_eq!(cut.gamma, Some(8.0));

        let empty = percentile_cut(&r, 0.0).unwrap();
        assert!(empty.ridges.is_empty() && empty.gamma.is_none());
        assert!(percentile_cut(&r, 101.0).is_err());
        assert!(matches!(percentile_cut(&RidgePointSet::default(), 5.0), Err(FilamentError::EmptyRidges)));

        let tied = ridges(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(percentile_cut(&tied, 50.0).unwrap().ridges.len(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(ScmsConfig::default().validate().is_ok());
        let bad = [
            ScmsConfig { neighbors: 0, ..Default::default() },
            ScmsConfig { convergence: 0.0, ..Default::default() },
            ScmsConfig { percentage: Some(120.0), ..Default::default() },
            ScmsConfig { mesh_size: Some(0), ..Default::default() },
            ScmsConfig { threshold_quantile: -0.1, ..Default::default() },
            ScmsConfig { max_iterations: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(FilamentError::Parameter(_))), "{c:?}");
        }
    }

    #[test]
    fn small_run_reports_consistent_diagnostics() {
        let data = line_scene(300, 3e-4, 2);
        let cfg = ScmsConfig { convergence: 1e-6, seed: 4, ..Default::default() };
        let res = run_scms(&data, &cfg).unwrap();
        assert!(res.iterations_run <= cfg.max_iterations);
        assert!(res.per_point_iterations.iter().all(|&n| n <= res.iterations_run));
        assert_eq!(res.per_point_iterations.len() + res.discarded_mesh_count, 300);
        assert_eq!(res.ridges.len() + res.stranded_count, res.per_point_iterations.len());
        assert_eq!(res.ridges.densities.len(), res.ridges.len());
        assert_eq!(run_scms(&data, &cfg).unwrap(), res);
    }
}
