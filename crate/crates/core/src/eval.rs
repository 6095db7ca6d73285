//! Envelope coverage of held-out incidents around estimated ridges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::GeoPointSet;
use crate::error::{FilamentError, Result};
use crate::geo::{haversine, Distance, GeoPoint};
use crate::ingest::subsample;
use crate::scms::{run_scms, RidgePointSet, ScmsConfig};
use crate::stats::{mean, quantile, quantile_sorted, sample_sd};

/// Mixed into the base seed for the single test-set subsample.
const TEST_SEED_SALT: u64 = 0x7e57_5eed_0000_0001;

/// Distance from `incident` to the closest ridge point.
pub fn nearest_ridge_distance(incident: GeoPoint, ridges: &RidgePointSet) -> Result<Distance> {
    if ridges.is_empty() {
        return Err(FilamentError::EmptyRidges);
    }
    let mut best = f64::INFINITY;
    for r in &ridges.points {
        best = best.min(haversine(incident, *r)?.radians());
    }
    Distance::from_radians(best)
}

/// Nearest-ridge distances for every incident, in input order.
pub fn nearest_ridge_distances(incidents: &GeoPointSet, ridges: &RidgePointSet) -> Result<Vec<Distance>> {
    incidents.points().par_iter().map(|&p| nearest_ridge_distance(p, ridges)).collect()
}

/// Fraction of incidents whose nearest ridge point lies within `radius`.
pub fn coverage_at(incidents: &GeoPointSet, ridges: &RidgePointSet, radius: Distance) -> Result<f64> {
    let d = nearest_ridge_distances(incidents, ridges)?;
    let hits = d.iter().filter(|x| **x <= radius).count();
    Ok(hits as f64 / d.len() as f64)
}

/// Coverage at each radius from pre-sorted nearest distances (radians).
fn coverage_profile(sorted: &[f64], radii: &[Distance]) -> Vec<f64> {
    let n = sorted.len() as f64;
    radii.iter().map(|r| sorted.partition_point(|&d| d <= r.radians()) as f64 / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandMethod {
    /// `mean +/- t(runs - 1) * sd / sqrt(runs)`.
    #[default]
    StudentT,
    /// Empirical quantiles of the run values.
    Percentile,
}

/// Per-radius confidence band over runs.
///
/// `samples` is indexed `[run][radius]`. Bounds are clipped to `[0, 1]` and
/// always bracket the run mean.
pub fn confidence_band(samples: &[Vec<f64>], level: f64, method: BandMethod) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs = samples.len();
    if runs < 2 {
        return Err(FilamentError::param(format!("confidence band needs at least 2 runs, got {runs}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(FilamentError::param(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let width = samples[0].len();
    if samples.iter().any(|row| row.len() != width) {
        return Err(FilamentError::param("every run must cover the same radii"));
    }
    let t = StudentsT::new(0.0, 1.0, (runs - 1) as f64)
        .map_err(|e| FilamentError::Internal(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * level);
    let tail = 0.5 * (1.0 - level);

    let mut low = Vec::with_capacity(width);
    let mut high = Vec::with_capacity(width);
    for j in 0..width {
        let column: Vec<f64> = samples.iter().map(|row| row[j]).collect();
        let m = mean(&column);
        let (lo, hi) = match method {
            BandMethod::StudentT => {
                let half = t * sample_sd(&column) / (runs as f64).sqrt();
                (m - half, m + half)
            }
            BandMethod::Percentile => (quantile(&column, tail), quantile(&column, 1.0 - tail)),
        };
        low.push(lo.min(m).clamp(0.0, 1.0));
        high.push(hi.max(m).clamp(0.0, 1.0));
    }
    Ok((low, high))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub radii_miles: Vec<f64>,
    /// `[run][radius]` coverage fractions.
    pub per_run_coverage: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

/// Five-number summary of iterations to convergence across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub per_run_iterations: Vec<usize>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl IterationStats {
    /// Quartiles use inclusive linear interpolation.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(FilamentError::param("no iteration counts to summarize"));
        }
        let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(IterationStats {
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            per_run_iterations: counts,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Evenly spaced radii `min, min + step, ..., max` in miles.
///
/// Values are snapped to 1e-9 mi so that decimal steps print cleanly.
pub fn radius_sweep(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min >= 0.0 && max >= min) {
        return Err(FilamentError::param(format!("invalid radius range [{min}, {max}]")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(FilamentError::param(format!("radius step must be positive, got {step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub runs: usize,
    /// Ascending envelope radii in miles.
    pub radii_miles: Vec<f64>,
    /// Training subsample size per run (capped at the training set size).
    pub train_sample: usize,
    /// Test subsample size, drawn once per evaluation.
    pub test_sample: usize,
    pub base_seed: u64,
    /// Run `r` uses seed `base_seed + r * seed_stride`; zero repeats one seed.
    pub seed_stride: u64,
    pub level: f64,
    pub band: BandMethod,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            runs: 10,
            radii_miles: radius_sweep(0.1, 1.0, 0.01).expect("static sweep"),
            train_sample: 5000,
            test_sample: 5000,
            base_seed: 0,
            seed_stride: 1,
            level: 0.95,
            band: BandMethod::StudentT,
        }
    }
}

impl EvalConfig {
    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add((run as u64).wrapping_mul(self.seed_stride))
    }

    fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(FilamentError::param(format!("runs must be at least 2, got {}", self.runs)));
        }
        if self.radii_miles.is_empty() {
            return Err(FilamentError::param("at least one radius is required"));
        }
        if self.radii_miles.windows(2).any(|w| w[0] > w[1] || w[0].is_nan()) || self.radii_miles[0] < 0.0 {
            return Err(FilamentError::param("radii must be non-negative and ascending"));
        }
        if self.train_sample == 0 || self.test_sample == 0 {
            return Err(FilamentError::param("sample sizes must be at least 1"));
        }
        Ok(())
    }
}

/// Fits ridges on `runs` training subsamples and sweeps envelope coverage of
/// one fixed test subsample over every radius.
pub fn coverage_curve(
    train: &GeoPointSet,
    test: &GeoPointSet,
    scms: &ScmsConfig,
    eval: &EvalConfig,
) -> Result<(CoverageCurve, IterationStats)> {
    eval.validate()?;
    let radii = eval.radii_miles.iter().map(|&r| Distance::from_miles(r)).collect::<Result<Vec<_>>>()?;

    let test_n = eval.test_sample.min(test.len());
    let test_set = GeoPointSet::new(subsample(test.points(), test_n, eval.base_seed ^ TEST_SEED_SALT)?)?;
    let train_n = eval.train_sample.min(train.len());

    let mut per_run = Vec::with_capacity(eval.runs);
    let mut iterations = Vec::with_capacity(eval.runs);
    for run in 0..eval.runs {
        let seed = eval.run_seed(run);
        let sample = GeoPointSet::new(subsample(train.points(), train_n, seed)?)?;
        let config = ScmsConfig { seed, ..scms.clone() };
        let fit = run_scms(&sample, &config)?;
        let mut dists: Vec<f64> =
            nearest_ridge_distances(&test_set, &fit.ridges)?.into_iter().map(Distance::radians).collect();
        dists.sort_unstable_by(f64::total_cmp);
        per_run.push(coverage_profile(&dists, &radii));
        iterations.push(fit.iterations_run);
    }

    let (ci_low, ci_high) = confidence_band(&per_run, eval.level, eval.band)?;
    let mean =
        (0..radii.len()).map(|j| crate::stats::mean(&per_run.iter().map(|row| row[j]).collect::<Vec<_>>())).collect();
    let curve =
        CoverageCurve { radii_miles: eval.radii_miles.clone(), per_run_coverage: per_run, mean, ci_low, ci_high };
    Ok((curve, IterationStats::from_counts(iterations)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::EARTH_RADIUS_MILES;

    fn ridges(points: &[(f64, f64)]) -> RidgePointSet {
        RidgePointSet {
            points: points.iter().map(|&(lat, lon)| GeoPoint::new(lat, lon).unwrap()).collect(),
            densities: vec![1.0; points.len()],
            converged: vec![true; points.len()],
        }
    }

    /// Point `miles` due north of `p`.
    fn north_of(p: (f64, f64), miles: f64) -> (f64, f64) {
        (p.0 + (miles / EARTH_RADIUS_MILES).to_degrees(), p.1)
    }

    #[test]
    fn nearest_distance_basics() {
        let r = ridges(&[(41.9, -87.6)]);
        let on = GeoPoint::new(41.9, -87.6).unwrap();
        assert_eq!(nearest_ridge_distance(on, &r).unwrap().radians(), 0.0);
        let off = GeoPoint::new(41.95, -87.7).unwrap();
        assert_eq!(nearest_ridge_distance(off, &r).unwrap(), haversine(off, r.points[0]).unwrap());
        assert!(matches!(nearest_ridge_distance(on, &RidgePointSet::default()), Err(FilamentError::EmptyRidges)));
    }

    #[test]
    fn crafted_coverage() {
        let base = (41.88, -87.63);
        let r = ridges(&[base]);
        let offsets = [0.02, 0.05, 0.09, 0.15, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0];
        let incidents =
            GeoPointSet::from_degrees(&offsets.iter().map(|&m| north_of(base, m)).collect::<Vec<_>>()).unwrap();
        let c = coverage_at(&incidents, &r, Distance::from_miles(0.1).unwrap()).unwrap();
        assert_eq!(c, 0.3);
        assert_eq!(coverage_at(&incidents, &r, Distance::ZERO).unwrap(), 0.0);
        assert_eq!(coverage_at(&incidents, &r, Distance::from_miles(2.5).unwrap()).unwrap(), 1.0);
        assert_eq!(coverage_at(&incidents, &r, Distance::from_radians(f64::MAX).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn band_zero_variance() {
        let rows = vec![vec![0.3, 0.7, 1.0]; 5];
        for method in [BandMethod::StudentT, BandMethod::Percentile] {
            let (lo, hi) = confidence_band(&rows, 0.95, method).unwrap();
            assert_eq!(lo, vec![0.3, 0.7, 1.0]);
            assert_eq!(hi, vec![0.3, 0.7, 1.0]);
        }
    }

    #[test]
    fn band_two_runs_matches_cauchy_quantile() {
        // With one degree of freedom the t distribution is Cauchy, so the
        // 97.5% quantile is tan(0.475 pi) = 12.706204736174705.
        let t = (0.475 * std::f64::consts::PI).tan();
        assert!((t - 12.706_204_736_174_705).abs() < 1e-12);
        let rows = vec![vec![0.9], vec![0.8]];
        let (lo, hi) = confidence_band(&rows, 0.95, BandMethod::StudentT).unwrap();
        let sd = (2.0 * 0.05f64 * 0.05).sqrt();
        let half = t * sd / 2f64.sqrt();
        assert!((lo[0] - (0.85 - half).max(0.0)).abs() < 1e-9);
        assert!((hi[0] - (0.85 + half).min(1.0)).abs() < 1e-9);

        let rows = vec![vec![0.99], vec![0.98]];
        let (lo, hi) = confidence_band(&rows, 0.95, BandMethod::StudentT).unwrap();
        let half = t * 0.005f64.hypot(0.005) / 2f64.sqrt();
        assert!((lo[0] - (0.985 - half)).abs() < 1e-9);
        assert_eq!(hi[0], 1.0);
    }

    #[test]
    fn band_requires_two_runs() {
        assert!(confidence_band(&[vec![0.5]], 0.95, BandMethod::StudentT).is_err());
        assert!(confidence_band(&[vec![0.5], vec![0.5, 0.6]], 0.95, BandMethod::StudentT).is_err());
    }

    #[test]
    fn sweep_shape() {
        let r = radius_sweep(0.1, 1.0, 0.01).unwrap();
        assert_eq!(r.len(), 91);
        assert_eq!(r[0], 0.1);
        assert_eq!(r[2], 0.12);
        assert_eq!(r[90], 1.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        assert!(radius_sweep(1.0, 0.5, 0.1).is_err());
        assert!(radius_sweep(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn iteration_stats_against_sorted_oracle() {
        let counts = vec![12, 7, 30, 9, 15, 11, 10, 8, 14, 13];
        let s = IterationStats::from_counts(counts.clone()).unwrap();
        let mut v = counts.clone();
        v.sort();
        // Inclusive linear interpolation: position q * (n - 1).
        let at = |q: f64| {
            let pos = q * 9.0;
            let (i, f) = (pos.floor() as usize, pos.fract());
            v[i] as f64 + f * (v[(i + 1).min(9)] as f64 - v[i] as f64)
        };
        assert_eq!(s.min, 7.0);
        assert_eq!(s.max, 30.0);
        assert_eq!(s.q1, at(0.25));
        assert_eq!(s.median, at(0.5));
        assert_eq!(s.q3, at(0.75));
        assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }
}
