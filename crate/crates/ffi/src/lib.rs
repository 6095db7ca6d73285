//! C ABI over `filament-core`.
//!
//! Objects are opaque handles created by `flm_*_new`-style functions and
//! released with the matching `flm_*_free`. Every fallible call returns a
//! [`FlmStatus`]; on failure a message is available from
//! [`flm_last_error_message`] on the same thread. Coordinates cross the
//! boundary in degrees, bandwidths in radians.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use filament_core::ingest::{filter_part1, load_csv, CsvSchema, LabelMapping};
use filament_core::{
    haversine, knn_bandwidth, run_scms, Bandwidth, DensityModel, FilamentError, GeoPoint, GeoPointSet, ScmsConfig,
    ScmsResult,
};

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Out-of-range coordinate or parameter.
    InvalidArgument = 2,
    DegenerateData = 3,
    /// Missing file, missing column or malformed CSV.
    Ingest = 4,
    Io = 5,
    Internal = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

impl From<&FilamentError> for FlmStatus {
    fn from(err: &FilamentError) -> Self {
        use FilamentError::*;
        match err {
            Domain { .. } | Parameter(_) | ThresholdTooHigh { .. } | UnsupportedKind(_) => FlmStatus::InvalidArgument,
            DegenerateData(_) | EmptyResult | EmptyRidges => FlmStatus::DegenerateData,
            MissingFile(_) | MissingColumn(_) | MalformedHeader(_) | Mapping { .. } | Csv(_) => FlmStatus::Ingest,
            Io(_) | Json(_) => FlmStatus::Io,
            Internal(_) => FlmStatus::Internal,
        }
    }
}

/// Opaque set of input points.
pub struct FlmPoints(GeoPointSet);

/// Opaque kernel density model.
pub struct FlmModel(DensityModel);

/// Opaque ridge estimation result.
pub struct FlmRidges(ScmsResult);

/// Ridge estimation parameters. Obtain defaults from
/// [`flm_scms_config_default`] and adjust fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FlmScmsConfig {
    pub neighbors: usize,
    /// Fixed bandwidth in radians; 0 selects the k-NN estimate.
    pub bandwidth_radians: f64,
    /// Per-point convergence threshold in degrees.
    pub convergence_degrees: f64,
    /// Top-percent density cut; negative disables it.
    pub percentage: f64,
    /// 0 uses one mesh point per data point.
    pub mesh_size: usize,
    pub threshold_quantile: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), FlmStatus>) -> FlmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FlmStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            FlmStatus::Panic
        }
    }
}

fn fail(err: FilamentError) -> FlmStatus {
    let status = FlmStatus::from(&err);
    set_last_error(err.to_string());
    status
}

fn null(what: &str) -> FlmStatus {
    set_last_error(format!("{what} is null"));
    FlmStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FlmStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), FlmStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the most recent failed call on this thread, or NULL.
/// The string stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn flm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Great-circle distance in miles between two points given in degrees.
///
/// # Safety
/// `out_miles` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_haversine_miles(
    lat_a: f64,
    lon_a: f64,
    lat_b: f64,
    lon_b: f64,
    out_miles: *mut f64,
) -> FlmStatus {
    guard(|| {
        let a = GeoPoint::new(lat_a, lon_a).map_err(fail)?;
        let b = GeoPoint::new(lat_b, lon_b).map_err(fail)?;
        let d = haversine(a, b).map_err(fail)?;
        write_out(out_miles, d.miles(), "out_miles")
    })
}

/// Builds a point set from parallel latitude/longitude arrays in degrees.
///
/// # Safety
/// `lat` and `lon` must each point to `n` readable doubles; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_points_new(
    lat: *const f64,
    lon: *const f64,
    n: usize,
    out: *mut *mut FlmPoints,
) -> FlmStatus {
    guard(|| {
        if lat.is_null() || lon.is_null() {
            return Err(null("coordinate array"));
        }
        let lat = std::slice::from_raw_parts(lat, n);
        let lon = std::slice::from_raw_parts(lon, n);
        let points =
            lat.iter().zip(lon).map(|(&la, &lo)| GeoPoint::new(la, lo)).collect::<Result<Vec<_>, _>>().map_err(fail)?;
        let set = GeoPointSet::new(points).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(FlmPoints(set))), "out")
    })
}

/// Loads `Latitude`/`Longitude` columns from a CSV file. When `part1_only`
/// is nonzero, rows are restricted to Part I offense types read from the
/// `Primary Type` column.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_points_load_csv(
    path: *const c_char,
    part1_only: i32,
    out: *mut *mut FlmPoints,
) -> FlmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| fail(FilamentError::Parameter(e.to_string())))?;
        let schema = if part1_only != 0 { CsvSchema::default() } else { CsvSchema::coordinates_only() };
        let (mut records, _) = load_csv(path, &schema).map_err(fail)?;
        if part1_only != 0 {
            records = filter_part1(records, &LabelMapping::default()).0;
        }
        let set = GeoPointSet::new(records.into_iter().map(|r| r.location).collect()).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(FlmPoints(set))), "out")
    })
}

/// Number of points, or 0 for NULL.
///
/// # Safety
/// `points` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flm_points_len(points: *const FlmPoints) -> usize {
    points.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `points` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flm_points_free(points: *mut FlmPoints) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

/// k-nearest-neighbor bandwidth in radians.
///
/// # Safety
/// `points` must be a live handle; `out_radians` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_knn_bandwidth(points: *const FlmPoints, k: usize, out_radians: *mut f64) -> FlmStatus {
    guard(|| {
        let points = deref(points, "points")?;
        let bw = knn_bandwidth(&points.0, k).map_err(fail)?;
        write_out(out_radians, bw.radians(), "out_radians")
    })
}

/// Density model over a copy of `points` with the given bandwidth.
///
/// # Safety
/// `points` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_model_new(
    points: *const FlmPoints,
    bandwidth_radians: f64,
    out: *mut *mut FlmModel,
) -> FlmStatus {
    guard(|| {
        let points = deref(points, "points")?;
        let bw = Bandwidth::from_radians(bandwidth_radians).map_err(fail)?;
        let model = DensityModel::new(points.0.clone(), bw);
        write_out(out, Box::into_raw(Box::new(FlmModel(model))), "out")
    })
}

/// Kernel density at a point given in degrees.
///
/// # Safety
/// `model` must be a live handle; `out_density` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_model_density(
    model: *const FlmModel,
    lat: f64,
    lon: f64,
    out_density: *mut f64,
) -> FlmStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let x = GeoPoint::new(lat, lon).map_err(fail)?;
        write_out(out_density, model.0.kde(x), "out_density")
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flm_model_free(model: *mut FlmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Default estimation parameters.
#[no_mangle]
pub extern "C" fn flm_scms_config_default() -> FlmScmsConfig {
    let d = ScmsConfig::default();
    FlmScmsConfig {
        neighbors: d.neighbors,
        bandwidth_radians: 0.0,
        convergence_degrees: d.convergence,
        percentage: -1.0,
        mesh_size: 0,
        threshold_quantile: d.threshold_quantile,
        max_iterations: d.max_iterations,
        seed: d.seed,
    }
}

fn to_config(c: &FlmScmsConfig) -> Result<ScmsConfig, FilamentError> {
    Ok(ScmsConfig {
        neighbors: c.neighbors,
        bandwidth: if c.bandwidth_radians == 0.0 { None } else { Some(Bandwidth::from_radians(c.bandwidth_radians)?) },
        convergence: c.convergence_degrees,
        percentage: (c.percentage >= 0.0).then_some(c.percentage),
        mesh_size: (c.mesh_size != 0).then_some(c.mesh_size),
        threshold_quantile: c.threshold_quantile,
        max_iterations: c.max_iterations,
        seed: c.seed,
    })
}

/// Runs ridge estimation. A NULL `config` uses the defaults.
///
/// # Safety
/// `points` must be a live handle, `config` NULL or readable, `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn flm_scms_run(
    points: *const FlmPoints,
    config: *const FlmScmsConfig,
    out: *mut *mut FlmRidges,
) -> FlmStatus {
    guard(|| {
        let points = deref(points, "points")?;
        let config = match config.as_ref() {
            Some(c) => to_config(c).map_err(fail)?,
            None => ScmsConfig::default(),
        };
        let result = run_scms(&points.0, &config).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(FlmRidges(result))), "out")
    })
}

/// Number of ridge points, or 0 for NULL.
///
/// # Safety
/// `ridges` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flm_ridges_len(ridges: *const FlmRidges) -> usize {
    ridges.as_ref().map_or(0, |r| r.0.ridges.len())
}

/// Sweeps executed by the estimation, or 0 for NULL.
///
/// # Safety
/// `ridges` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flm_ridges_iterations(ridges: *const FlmRidges) -> usize {
    ridges.as_ref().map_or(0, |r| r.0.iterations_run)
}

/// Bandwidth the estimation used, in radians; 0 for NULL.
///
/// # Safety
/// `ridges` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flm_ridges_bandwidth(ridges: *const FlmRidges) -> f64 {
    ridges.as_ref().map_or(0.0, |r| r.0.bandwidth_used.radians())
}

/// Copies up to `capacity` ridge points (degrees) and densities into the
/// caller's arrays and stores the number copied in `out_written`. Any of
/// the three arrays may be NULL to skip it.
///
/// # Safety
/// Non-NULL arrays must hold `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn flm_ridges_copy(
    ridges: *const FlmRidges,
    lat: *mut f64,
    lon: *mut f64,
    density: *mut f64,
    capacity: usize,
    out_written: *mut usize,
) -> FlmStatus {
    guard(|| {
        let set = &deref(ridges, "ridges")?.0.ridges;
        let n = set.len().min(capacity);
        for i in 0..n {
            let p = set.points[i];
            if !lat.is_null() {
                lat.add(i).write(p.lat);
            }
            if !lon.is_null() {
                lon.add(i).write(p.lon);
            }
            if !density.is_null() {
                density.add(i).write(set.densities[i]);
            }
        }
        if out_written.is_null() {
            Ok(())
        } else {
            write_out(out_written, n, "out_written")
        }
    })
}

/// # Safety
/// `ridges` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flm_ridges_free(ridges: *mut FlmRidges) {
    if !ridges.is_null() {
        drop(Box::from_raw(ridges));
    }
}
