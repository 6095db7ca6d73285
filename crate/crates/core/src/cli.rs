//! Command-line interface: argument parsing, run manifests and the command
//! implementations behind the `filament` binary.
//!
//! Data goes to files or stdout; progress and diagnostics go to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::density::{knn_bandwidth, Bandwidth, GeoPointSet, DEFAULT_NEIGHBORS};
use crate::error::{FilamentError, Result};
use crate::eval::{coverage_curve, radius_sweep, BandMethod, CoverageCurve, EvalConfig, IterationStats};
use crate::ingest::{filter_part1, load_csv, subsample, CsvSchema, FilterReport, LabelMapping};
use crate::scms::{run_scms, RidgePointSet, ScmsConfig, ScmsResult};
use crate::synth::{generate, FilamentShape, FilamentSpec};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "filament", version, about = "Density ridge estimation for geospatial point data")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the k-NN kernel bandwidth of a point file.
    Bandwidth(BandwidthArgs),
    /// Estimate density ridges and write them as CSV and/or GeoJSON.
    Estimate(EstimateArgs),
    /// Sweep envelope coverage of test incidents around ridges fitted on
    /// repeated training subsamples.
    Evaluate(EvaluateArgs),
    /// Write a synthetic filament scene as a Latitude,Longitude CSV.
    Synth(SynthArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Keep only rows dated in this year (needs a date column).
    #[arg(long)]
    pub year: Option<i32>,
    /// Use every row instead of the Part I offense types.
    #[arg(long)]
    pub all_types: bool,
    /// Label mapping file (`LABEL = category` lines).
    #[arg(long, value_name = "FILE")]
    pub mapping: Option<PathBuf>,
    #[arg(long, default_value = "Latitude")]
    pub lat_column: String,
    #[arg(long, default_value = "Longitude")]
    pub lon_column: String,
    #[arg(long, default_value = "Primary Type")]
    pub type_column: String,
    #[arg(long, default_value = "Date")]
    pub date_column: String,
}

#[derive(Debug, Clone, Args)]
pub struct ScmsArgs {
    /// Neighbors for the k-NN bandwidth.
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    pub neighbors: usize,
    /// Fixed bandwidth in degrees; skips the k-NN estimate.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Per-point convergence threshold in degrees.
    #[arg(long, default_value_t = 0.01)]
    pub convergence: f64,
    /// Keep the top PERCENTAGE percent of ridge points by density.
    #[arg(long)]
    pub percentage: Option<f64>,
    /// Mesh points (default: one per data point).
    #[arg(long)]
    pub mesh_size: Option<usize>,
    /// Quantile of mesh densities below which mesh points are dropped.
    #[arg(long, default_value_t = 0.5)]
    pub threshold_quantile: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
}

impl ScmsArgs {
    fn to_config(&self, seed: u64) -> Result<ScmsConfig> {
        let config = ScmsConfig {
            neighbors: self.neighbors,
            bandwidth: self.bandwidth.map(Bandwidth::from_degrees).transpose()?,
            convergence: self.convergence,
            percentage: self.percentage,
            mesh_size: self.mesh_size,
            threshold_quantile: self.threshold_quantile,
            max_iterations: self.max_iter,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    pub neighbors: usize,
    /// Subsample this many points first.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub input_args: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub scms: ScmsArgs,
    /// Subsample this many points first.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub input_args: InputArgs,
    /// Output file; `.csv` (lat,lon,density) or `.geojson` (lon,lat). Repeatable.
    #[arg(long, required = true)]
    pub out: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandArg {
    T,
    Percentile,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub train: PathBuf,
    pub test: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub radii_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radii_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub radii_step: f64,
    /// Training points per run.
    #[arg(long, default_value_t = 5000)]
    pub sample: usize,
    /// Test points, drawn once.
    #[arg(long, default_value_t = 5000)]
    pub test_sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run r uses seed + r * stride.
    #[arg(long, default_value_t = 1)]
    pub seed_stride: u64,
    #[arg(long, value_enum, default_value_t = BandArg::T)]
    pub band: BandArg,
    /// Year filter for the test file.
    #[arg(long)]
    pub test_year: Option<i32>,
    #[command(flatten)]
    pub scms: ScmsArgs,
    #[command(flatten)]
    pub input_args: InputArgs,
    /// Directory receiving coverage.csv and iterations.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeKind {
    LineSegment,
    CircleArc,
    GaussianCloud,
    Cross,
}

/// Scene geometry is given in radians, `LAT,LON` pairs for points.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Full scene as JSON; overrides the shape flags.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShapeKind::LineSegment)]
    pub kind: ShapeKind,
    #[arg(long, value_parser = parse_pair, default_value = "0.7309,-1.5294")]
    pub center: [f64; 2],
    #[arg(long, value_parser = parse_pair)]
    pub start: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair)]
    pub end: Option<[f64; 2]>,
    #[arg(long, default_value_t = 0.01)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.0)]
    pub start_angle: f64,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub end_angle: f64,
    #[arg(long, default_value_t = 0.01)]
    pub half_length: f64,
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Replace the recorded estimate outputs.
    #[arg(long)]
    pub out: Vec<PathBuf>,
    /// Replace the recorded evaluate output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected LAT,LON")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([a, b])
}

/// Where and how to read a point file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub schema: CsvSchema,
    /// Restrict to Part I offense types.
    pub part1: bool,
    pub mapping: Option<PathBuf>,
}

impl InputSpec {
    fn new(path: &Path, args: &InputArgs, year: Option<i32>) -> Self {
        InputSpec {
            path: absolute(path),
            schema: CsvSchema {
                type_column: (!args.all_types).then(|| args.type_column.clone()),
                lat_column: args.lat_column.clone(),
                lon_column: args.lon_column.clone(),
                date_column: Some(args.date_column.clone()),
                year,
            },
            part1: !args.all_types,
            mapping: args.mapping.as_deref().map(absolute),
        }
    }

    pub fn load(&self) -> Result<(GeoPointSet, FilterReport)> {
        let (records, mut report) = load_csv(&self.path, &self.schema)?;
        let records = if self.part1 {
            let mapping = match &self.mapping {
                Some(path) => LabelMapping::load(path)?,
                None => LabelMapping::default(),
            };
            let (kept, filtered) = filter_part1(records, &mapping);
            report.rows_after_type_filter = filtered.rows_after_type_filter;
            report.per_type_counts = filtered.per_type_counts;
            report.unmapped_counts = filtered.unmapped_counts;
            kept
        } else {
            records
        };
        if records.is_empty() {
            return Err(FilamentError::DegenerateData(format!("no usable points in {}", self.path.display())));
        }
        let points = GeoPointSet::new(records.into_iter().map(|r| r.location).collect())?;
        Ok((points, report))
    }

    fn load_sampled(&self, sample: Option<usize>, seed: u64) -> Result<GeoPointSet> {
        let (points, report) = self.load()?;
        log_report(&self.path, &report);
        match sample {
            Some(n) => GeoPointSet::new(subsample(points.points(), n, seed)?),
            None => Ok(points),
        }
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn log_report(path: &Path, report: &FilterReport) {
    eprintln!(
        "{}: {} rows, {} dropped (missing fields), {} outside year, {} kept",
        path.display(),
        report.rows_read,
        report.rows_dropped_missing,
        report.rows_outside_year,
        report.rows_after_type_filter
    );
    for (label, count) in &report.per_type_counts {
        eprintln!("  {label}: {count}");
    }
    let unmapped: usize = report.unmapped_counts.values().sum();
    if unmapped > 0 {
        eprintln!("  {unmapped} rows with {} unmapped types dropped", report.unmapped_counts.len());
    }
}

/// A fully resolved command invocation.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    Bandwidth { input: InputSpec, neighbors: usize, sample: Option<usize>, seed: u64 },
    Estimate { input: InputSpec, config: ScmsConfig, sample: Option<usize>, outputs: Vec<PathBuf> },
    Evaluate { train: InputSpec, test: InputSpec, config: ScmsConfig, eval: EvalConfig, out_dir: PathBuf },
    Synth { spec: FilamentSpec, out: PathBuf },
}

/// Self-contained record of a run, sufficient to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch when the run started.
    pub created_unix: u64,
    pub threads: Option<usize>,
    pub invocation: Invocation,
}

impl RunManifest {
    pub fn new(invocation: Invocation, threads: Option<usize>) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            threads,
            invocation,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(text)?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(FilamentError::param(format!("unsupported manifest version {}", manifest.manifest_version)));
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FilamentError::MissingFile(path.display().to_string()),
            _ => FilamentError::Io(e),
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &FilamentError) -> u8 {
    use FilamentError::*;
    match err {
        MissingFile(_) | MissingColumn(_) | MalformedHeader(_) | Mapping { .. } | Csv(_) => 3,
        Domain { .. } | Parameter(_) | ThresholdTooHigh { .. } | UnsupportedKind(_) => 4,
        DegenerateData(_) | EmptyResult | EmptyRidges => 5,
        Io(_) | Json(_) => 6,
        Internal(_) => 1,
    }
}

/// Runs a parsed command line on a pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(FilamentError::param("--threads must be at least 1"));
    }
    let invocation = match cli.command {
        Command::Replay(args) => {
            let manifest = RunManifest::load(&args.manifest)?;
            let invocation = override_outputs(manifest.invocation, args)?;
            return in_pool(threads.or(manifest.threads), || execute(&invocation));
        }
        command => resolve(command)?,
    };
    in_pool(threads, || execute(&invocation.0))?;
    if let Some(path) = invocation.1 {
        RunManifest::new(invocation.0, threads).save(&path)?;
        eprintln!("manifest written to {}", path.display());
    }
    Ok(())
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| FilamentError::Internal(e.to_string()))?;
    pool.install(f)
}

fn override_outputs(invocation: Invocation, args: ReplayArgs) -> Result<Invocation> {
    Ok(match invocation {
        Invocation::Estimate { input, config, sample, outputs } => Invocation::Estimate {
            input,
            config,
            sample,
            outputs: if args.out.is_empty() { outputs } else { args.out },
        },
        Invocation::Evaluate { train, test, config, eval, out_dir } => {
            Invocation::Evaluate { train, test, config, eval, out_dir: args.out_dir.unwrap_or(out_dir) }
        }
        Invocation::Synth { spec, out } => {
            let out = match args.out.as_slice() {
                [] => out,
                [one] => one.clone(),
                _ => return Err(FilamentError::param("synth writes a single --out file")),
            };
            Invocation::Synth { spec, out }
        }
        other => other,
    })
}

fn resolve(command: Command) -> Result<(Invocation, Option<PathBuf>)> {
    Ok(match command {
        Command::Bandwidth(a) => (
            Invocation::Bandwidth {
                input: InputSpec::new(&a.input, &a.input_args, a.input_args.year),
                neighbors: a.neighbors,
                sample: a.sample,
                seed: a.seed,
            },
            a.manifest,
        ),
        Command::Estimate(a) => {
            for out in &a.out {
                OutputFormat::of(out)?;
            }
            (
                Invocation::Estimate {
                    input: InputSpec::new(&a.input, &a.input_args, a.input_args.year),
                    config: a.scms.to_config(a.seed)?,
                    sample: a.sample,
                    outputs: a.out.iter().map(|p| absolute(p)).collect(),
                },
                a.manifest,
            )
        }
        Command::Evaluate(a) => {
            let eval = EvalConfig {
                runs: a.runs,
                radii_miles: radius_sweep(a.radii_min, a.radii_max, a.radii_step)?,
                train_sample: a.sample,
                test_sample: a.test_sample,
                base_seed: a.seed,
                seed_stride: a.seed_stride,
                level: 0.95,
                band: match a.band {
                    BandArg::T => BandMethod::StudentT,
                    BandArg::Percentile => BandMethod::Percentile,
                },
            };
            (
                Invocation::Evaluate {
                    train: InputSpec::new(&a.train, &a.input_args, a.input_args.year),
                    test: InputSpec::new(&a.test, &a.input_args, a.test_year),
                    config: a.scms.to_config(a.seed)?,
                    eval,
                    out_dir: absolute(&a.out_dir),
                },
                a.manifest,
            )
        }
        Command::Synth(a) => {
            let spec = match &a.spec {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => synth_spec(&a)?,
            };
            (Invocation::Synth { spec, out: absolute(&a.out) }, a.manifest)
        }
        Command::Replay(_) => unreachable!("replay is handled by run"),
    })
}

fn synth_spec(a: &SynthArgs) -> Result<FilamentSpec> {
    let shape = match a.kind {
        ShapeKind::LineSegment => {
            let half = [a.half_length, a.half_length];
            FilamentShape::LineSegment {
                start: a.start.unwrap_or([a.center[0] - half[0], a.center[1] - half[1]]),
                end: a.end.unwrap_or([a.center[0] + half[0], a.center[1] + half[1]]),
            }
        }
        ShapeKind::CircleArc => FilamentShape::CircleArc {
            center: a.center,
            radius: a.radius,
            start_angle: a.start_angle,
            end_angle: a.end_angle,
        },
        ShapeKind::GaussianCloud => FilamentShape::GaussianCloud { center: a.center },
        ShapeKind::Cross => FilamentShape::Cross { center: a.center, half_length: a.half_length, angle: a.angle },
    };
    Ok(FilamentSpec { shape, noise_sigma: a.sigma, n: a.n, seed: a.seed })
}

/// Executes a resolved invocation, writing all of its outputs.
pub fn execute(invocation: &Invocation) -> Result<()> {
    match invocation {
        Invocation::Bandwidth { input, neighbors, sample, seed } => {
            let points = input.load_sampled(*sample, *seed)?;
            let bw = knn_bandwidth(&points, *neighbors)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "degrees\t{}", bw.degrees())?;
            writeln!(out, "miles\t{}", bw.miles())?;
            writeln!(out, "radians\t{}", bw.radians())?;
            Ok(())
        }
        Invocation::Estimate { input, config, sample, outputs } => {
            let points = input.load_sampled(*sample, config.seed)?;
            let result = run_scms(&points, config)?;
            log_scms(&result);
            for path in outputs {
                write_ridges(path, &result.ridges)?;
                eprintln!("wrote {} ridge points to {}", result.ridges.len(), path.display());
            }
            Ok(())
        }
        Invocation::Evaluate { train, test, config, eval, out_dir } => {
            let (train_pts, report) = train.load()?;
            log_report(&train.path, &report);
            let (test_pts, report) = test.load()?;
            log_report(&test.path, &report);
            let (curve, stats) = coverage_curve(&train_pts, &test_pts, config, eval)?;
            fs::create_dir_all(out_dir)?;
            fs::write(out_dir.join("coverage.csv"), coverage_csv(&curve)?)?;
            fs::write(out_dir.join("iterations.csv"), iterations_csv(&stats, eval)?)?;
            eprintln!("iterations: median {} (IQR {}, range {}-{})", stats.median, stats.iqr(), stats.min, stats.max);
            eprintln!("wrote coverage.csv and iterations.csv to {}", out_dir.display());
            Ok(())
        }
        Invocation::Synth { spec, out } => {
            let points = generate(spec)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["Latitude", "Longitude"])?;
            for p in points.iter() {
                w.write_record([p.lat.to_string(), p.lon.to_string()])?;
            }
            fs::write(out, finish_csv(w)?)?;
            eprintln!("wrote {} {} points to {}", points.len(), spec.shape.kind_name(), out.display());
            Ok(())
        }
    }
}

fn log_scms(result: &ScmsResult) {
    eprintln!(
        "bandwidth {} deg ({} mi); threshold {}; {} mesh points discarded",
        result.bandwidth_used.degrees(),
        result.bandwidth_used.miles(),
        result.threshold_used,
        result.discarded_mesh_count
    );
    eprintln!(
        "{} sweeps; {} ridge points ({} unconverged, {} stranded)",
        result.iterations_run,
        result.ridges.len(),
        result.unconverged_count,
        result.stranded_count
    );
    if result.empty_cut_warning {
        eprintln!("warning: percentile cut kept no ridge points");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    GeoJson,
}

impl OutputFormat {
    fn of(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(OutputFormat::Csv),
            Some("geojson") | Some("json") => Ok(OutputFormat::GeoJson),
            _ => Err(FilamentError::param(format!(
                "cannot tell output format of {}; use .csv or .geojson",
                path.display()
            ))),
        }
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| FilamentError::Io(e.into_error()))
}

/// `lat,lon,density` rows in degrees.
pub fn ridges_csv(ridges: &RidgePointSet) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lat", "lon", "density"])?;
    for (p, d) in ridges.points.iter().zip(&ridges.densities) {
        w.write_record([p.lat.to_string(), p.lon.to_string(), d.to_string()])?;
    }
    finish_csv(w)
}

/// One MultiPoint feature; coordinates are `[lon, lat]` per GeoJSON.
pub fn ridges_geojson(ridges: &RidgePointSet) -> Result<Vec<u8>> {
    let coords: Vec<[f64; 2]> = ridges.points.iter().map(|p| [p.lon, p.lat]).collect();
    let doc = serde_json::json!({
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "geometry": { "type": "MultiPoint", "coordinates": coords },
            "properties": { "density": ridges.densities },
        }],
    });
    let mut bytes = serde_json::to_vec(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_ridges(path: &Path, ridges: &RidgePointSet) -> Result<()> {
    let bytes = match OutputFormat::of(path)? {
        OutputFormat::Csv => ridges_csv(ridges)?,
        OutputFormat::GeoJson => ridges_geojson(ridges)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn coverage_csv(curve: &CoverageCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["radius_miles".to_string(), "mean_coverage".into(), "ci_low".into(), "ci_high".into()];
    header.extend((0..curve.per_run_coverage.len()).map(|r| format!("run_{r}")));
    w.write_record(&header)?;
    for (j, radius) in curve.radii_miles.iter().enumerate() {
        let mut row = vec![
            radius.to_string(),
            curve.mean[j].to_string(),
            curve.ci_low[j].to_string(),
            curve.ci_high[j].to_string(),
        ];
        row.extend(curve.per_run_coverage.iter().map(|run| run[j].to_string()));
        w.write_record(&row)?;
    }
    finish_csv(w)
}

pub fn iterations_csv(stats: &IterationStats, eval: &EvalConfig) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "seed", "iterations"])?;
    for (run, n) in stats.per_run_iterations.iter().enumerate() {
        w.write_record([run.to_string(), eval.run_seed(run).to_string(), n.to_string()])?;
    }
    finish_csv(w)
}
