//! Incident CSV loading, Part I type filtering and seeded subsampling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::GeoPointSet;
use crate::error::{FilamentError, Result};
use crate::geo::GeoPoint;

const DEFAULT_LABELS: &str = include_str!("../data/part1_labels.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub primary_type: String,
    pub location: GeoPoint,
}

/// Column names and optional year filter for incident CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    /// `None` reads bare coordinates; every record gets the label `POINT`.
    pub type_column: Option<String>,
    pub lat_column: String,
    pub lon_column: String,
    pub date_column: Option<String>,
    /// Keep only rows whose date falls in this year. Ignored when the date
    /// column is absent from the file.
    pub year: Option<i32>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            type_column: Some("Primary Type".into()),
            lat_column: "Latitude".into(),
            lon_column: "Longitude".into(),
            date_column: Some("Date".into()),
            year: None,
        }
    }
}

impl CsvSchema {
    /// Plain `lat,lon` files with the default coordinate column names.
    pub fn coordinates_only() -> Self {
        CsvSchema { type_column: None, date_column: None, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Data rows considered (after any year filter).
    pub rows_read: usize,
    /// Rows skipped because their date lies outside the requested year.
    pub rows_outside_year: usize,
    /// Rows with a missing or unparseable type, latitude or longitude.
    pub rows_dropped_missing: usize,
    pub rows_after_type_filter: usize,
    pub per_type_counts: BTreeMap<String, usize>,
    /// Labels without a Part I mapping, with how many rows each dropped.
    pub unmapped_counts: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn check(&self) -> bool {
        self.rows_after_type_filter + self.rows_dropped_missing <= self.rows_read
            && self.per_type_counts.values().sum::<usize>() == self.rows_after_type_filter
    }
}

fn parse_year(date: &str) -> Option<i32> {
    date.split(|c: char| !c.is_ascii_digit()).find(|tok| tok.len() == 4).and_then(|tok| tok.parse().ok())
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| FilamentError::MissingColumn(name.to_string()))
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Vec<IncidentRecord>, FilterReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => FilamentError::MissingFile(path.display().to_string()),
        _ => FilamentError::Io(e),
    })?;
    load_csv_reader(file, schema)
}

/// Streams records from any reader. Per-type counts are by raw label.
pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<(Vec<IncidentRecord>, FilterReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| FilamentError::MalformedHeader(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(FilamentError::MalformedHeader("no header row".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = headers.iter().find(|h| !h.trim().is_empty() && !seen.insert(h.trim())) {
        return Err(FilamentError::MalformedHeader(format!("duplicate column {dup:?}")));
    }

    let type_idx = schema.type_column.as_deref().map(|c| column_index(&headers, c)).transpose()?;
    let lat_idx = column_index(&headers, &schema.lat_column)?;
    let lon_idx = column_index(&headers, &schema.lon_column)?;
    let date_idx = match (schema.year, schema.date_column.as_deref()) {
        (Some(_), Some(col)) => headers.iter().position(|h| h.trim() == col),
        _ => None,
    };

    let mut report = FilterReport::default();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) => {
                report.rows_read += 1;
                report.rows_dropped_missing += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if let (Some(year), Some(idx)) = (schema.year, date_idx) {
            if row.get(idx).and_then(parse_year) != Some(year) {
                report.rows_outside_year += 1;
                continue;
            }
        }
        report.rows_read += 1;

        let field = |idx: usize| row.get(idx).map(str::trim).filter(|s| !s.is_empty());
        let label = match type_idx {
            Some(idx) => field(idx).map(str::to_string),
            None => Some("POINT".to_string()),
        };
        let lat = field(lat_idx).and_then(|s| f64::from_str(s).ok());
        let lon = field(lon_idx).and_then(|s| f64::from_str(s).ok());
        let parsed = match (label, lat, lon) {
            (Some(label), Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok().map(|p| (label, p)),
            _ => None,
        };
        match parsed {
            Some((primary_type, location)) => {
                *report.per_type_counts.entry(primary_type.clone()).or_default() += 1;
                records.push(IncidentRecord { primary_type, location });
            }
            None => report.rows_dropped_missing += 1,
        }
    }
    report.rows_after_type_filter = records.len();
    Ok((records, report))
}

/// The eight UCR Part I offense categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part1Category {
    LarcenyTheft,
    AggravatedAssault,
    Burglary,
    MotorVehicleTheft,
    Robbery,
    ForcibleRape,
    CriminalHomicide,
    Arson,
}

impl Part1Category {
    pub const ALL: [Part1Category; 8] = [
        Part1Category::LarcenyTheft,
        Part1Category::AggravatedAssault,
        Part1Category::Burglary,
        Part1Category::MotorVehicleTheft,
        Part1Category::Robbery,
        Part1Category::ForcibleRape,
        Part1Category::CriminalHomicide,
        Part1Category::Arson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Part1Category::LarcenyTheft => "larceny-theft",
            Part1Category::AggravatedAssault => "aggravated-assault",
            Part1Category::Burglary => "burglary",
            Part1Category::MotorVehicleTheft => "motor-vehicle-theft",
            Part1Category::Robbery => "robbery",
            Part1Category::ForcibleRape => "forcible-rape",
            Part1Category::CriminalHomicide => "criminal-homicide",
            Part1Category::Arson => "arson",
        }
    }
}

impl fmt::Display for Part1Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Part1Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        Part1Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown Part I category {s:?}"))
    }
}

/// Source label to Part I category, matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    map: BTreeMap<String, Part1Category>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping::parse(DEFAULT_LABELS).expect("bundled label mapping is valid")
    }
}

impl LabelMapping {
    /// Parses `LABEL = category` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (label, category) = line
                .split_once('=')
                .ok_or_else(|| FilamentError::Mapping { line: i + 1, reason: "expected `LABEL = category`".into() })?;
            let label = label.trim().to_uppercase();
            if label.is_empty() {
                return Err(FilamentError::Mapping { line: i + 1, reason: "empty label".into() });
            }
            let category =
                category.parse::<Part1Category>().map_err(|reason| FilamentError::Mapping { line: i + 1, reason })?;
            map.insert(label, category);
        }
        Ok(LabelMapping { map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FilamentError::MissingFile(path.display().to_string()),
            _ => FilamentError::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn category(&self, label: &str) -> Option<Part1Category> {
        self.map.get(&label.trim().to_uppercase()).copied()
    }
}

/// Keeps records whose label maps to a Part I category. Records are passed
/// through unchanged; per-type counts are keyed by category name.
pub fn filter_part1(records: Vec<IncidentRecord>, mapping: &LabelMapping) -> (Vec<IncidentRecord>, FilterReport) {
    let mut report = FilterReport { rows_read: records.len(), ..Default::default() };
    let mut kept = Vec::with_capacity(records.len());
    for rec in records {
        match mapping.category(&rec.primary_type) {
            Some(cat) => {
                *report.per_type_counts.entry(cat.name().to_string()).or_default() += 1;
                kept.push(rec);
            }
            None => *report.unmapped_counts.entry(rec.primary_type.clone()).or_default() += 1,
        }
    }
    report.rows_after_type_filter = kept.len();
    (kept, report)
}

/// Loads a CSV and applies the Part I filter, combining both reports.
pub fn load_part1(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    mapping: &LabelMapping,
) -> Result<(Vec<IncidentRecord>, FilterReport)> {
    let (records, loaded) = load_csv(path, schema)?;
    let (kept, filtered) = filter_part1(records, mapping);
    Ok((
        kept,
        FilterReport {
            per_type_counts: filtered.per_type_counts,
            unmapped_counts: filtered.unmapped_counts,
            rows_after_type_filter: filtered.rows_after_type_filter,
            ..loaded
        },
    ))
}

/// `n` items drawn uniformly without replacement, in draw order.
pub fn subsample<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>> {
    if n == 0 || n > items.len() {
        return Err(FilamentError::param(format!("subsample size must satisfy 1 <= n <= {}, got {n}", items.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, items.len(), n).into_iter().map(|i| items[i].clone()).collect())
}

/// Coordinates of `n` uniformly drawn records.
pub fn subsample_records(records: &[IncidentRecord], n: usize, seed: u64) -> Result<GeoPointSet> {
    let picked = subsample(records, n, seed)?;
    GeoPointSet::new(picked.into_iter().map(|r| r.location).collect())
}
