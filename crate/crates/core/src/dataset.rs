//! Ingestion, validation and regularisation of the observation tables.
//!
//! Three CSV files make up a dataset:
//!
//! * `sites.csv` with header `site_id,x,y,catchment_id` (planar coordinates),
//! * `observations.csv` with header `site_id,date,value` (ISO-8601 dates),
//! * `landuse.csv` with header `catchment_id,<cat_1>,...,<cat_K>` holding the
//!   areal proportion of each land-use category in every catchment.
//!
//! Loading enforces the per-row invariants and fails on the first violation.
//! [`validate_dataset`] instead reports every problem it can find, including
//! the series-length requirements that only matter for fitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SITES_FILE: &str = "sites.csv";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const LANDUSE_FILE: &str = "landuse.csv";

/// Tolerance on the sum of a composition row.
pub const COMPOSITION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub site_id: String,
    pub x: f64,
    pub y: f64,
    pub catchment_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub site_id: String,
    pub date: NaiveDate,
    pub value: f64,
}

/// Proportions of each land-use category over one catchment, in the order of
/// [`Dataset::categories`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandUseComposition {
    pub catchment_id: String,
    pub proportions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sites: Vec<Site>,
    pub observations: Vec<Observation>,
    pub compositions: Vec<LandUseComposition>,
    pub categories: Vec<String>,
}

impl Dataset {
    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn site_index(&self, site_id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.site_id == site_id)
    }

    /// Observations grouped per site, in site order.
    pub fn observations_by_site(&self) -> Vec<Vec<Observation>> {
        let index: HashMap<&str, usize> = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.site_id.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); self.sites.len()];
        for obs in &self.observations {
            if let Some(&i) = index.get(obs.site_id.as_str()) {
                out[i].push(obs.clone());
            }
        }
        out
    }

    /// Composition of the catchment each site belongs to.
    pub fn site_compositions(&self) -> Option<Vec<Vec<f64>>> {
        let by_catchment: HashMap<&str, &LandUseComposition> = self
            .compositions
            .iter()
            .map(|c| (c.catchment_id.as_str(), c))
            .collect();
        self.sites
            .iter()
            .map(|s| {
                by_catchment
                    .get(s.catchment_id.as_str())
                    .map(|c| c.proportions.clone())
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: cannot read: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: malformed CSV: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}, row {row}, column `{column}`: cannot parse {value:?}")]
    Parse {
        file: String,
        row: u64,
        column: String,
        value: String,
    },
    #[error("{file}, row {row}, column `{column}`: value is not finite")]
    NonFiniteValue { file: String, row: u64, column: String },
    #[error("{file}, row {row}: unknown site {site_id:?}")]
    UnknownSiteReference { file: String, row: u64, site_id: String },
    #[error("{file}, row {row}: unknown catchment {catchment_id:?}")]
    UnknownCatchment {
        file: String,
        row: u64,
        catchment_id: String,
    },
    #[error("{file}, row {row}: duplicate site {site_id:?}")]
    DuplicateSite { file: String, row: u64, site_id: String },
    #[error("{file}, row {row}: duplicate catchment {catchment_id:?}")]
    DuplicateCatchment {
        file: String,
        row: u64,
        catchment_id: String,
    },
    #[error("{file}, row {row}: proportions sum to {sum}, expected 1")]
    CompositionNotNormalized { file: String, row: u64, sum: f64 },
    #[error("{file}, row {row}, column `{column}`: negative proportion")]
    NegativeProportion { file: String, row: u64, column: String },
    #[error("{file}: no land-use categories in header")]
    NoCategories { file: String },
}

impl DatasetError {
    /// Stable machine-readable code for error records.
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::Io { .. } => "MissingFile",
            DatasetError::Csv { .. } => "MalformedCsv",
            DatasetError::MissingColumn { .. } => "MissingColumn",
            DatasetError::Parse { .. } => "ParseError",
            DatasetError::NonFiniteValue { .. } => "NonFiniteValue",
            DatasetError::UnknownSiteReference { .. } => "UnknownSiteReference",
            DatasetError::UnknownCatchment { .. } => "UnknownCatchment",
            DatasetError::DuplicateSite { .. } => "DuplicateSite",
            DatasetError::DuplicateCatchment { .. } => "DuplicateCatchment",
            DatasetError::CompositionNotNormalized { .. } => "CompositionNotNormalized",
            DatasetError::NegativeProportion { .. } => "NegativeProportion",
            DatasetError::NoCategories { .. } => "NoCategories",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Natural-log transform raw values on ingestion.
    pub log_transform: bool,
}

struct Table {
    file: String,
    headers: csv::StringRecord,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, DatasetError> {
        let file = path.display().to_string();
        let handle = File::open(path).map_err(|source| DatasetError::Io {
            file: file.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(handle);
        let headers = reader
            .headers()
            .map_err(|source| DatasetError::Csv {
                file: file.clone(),
                source,
            })?
            .clone();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|source| DatasetError::Csv {
                file: file.clone(),
                source,
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Table {
            file,
            headers,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize, DatasetError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn {
                file: self.file.clone(),
                column: name.to_string(),
            })
    }

    fn float(&self, row: u64, record: &csv::StringRecord, col: usize) -> Result<f64, DatasetError> {
        let raw = record.get(col).unwrap_or("");
        let value: f64 = raw.parse().map_err(|_| DatasetError::Parse {
            file: self.file.clone(),
            row,
            column: self.headers[col].to_string(),
            value: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(DatasetError::NonFiniteValue {
                file: self.file.clone(),
                row,
                column: self.headers[col].to_string(),
            });
        }
        Ok(value)
    }
}

/// Parses `YYYY-MM-DD`, or an ISO-8601 timestamp whose date part is kept.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let date_part = raw.get(..10)?;
    if raw.len() > 10 && !matches!(raw.as_bytes()[10], b'T' | b' ') {
        return None;
    }
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d").ok()
}

/// Reads and checks the three ingestion tables.
///
/// Replicate observations of the same site on the same date are collapsed to
/// their mean. Sites keep file order; observations are sorted by site then date.
pub fn load_dataset(
    sites_path: &Path,
    obs_path: &Path,
    comp_path: &Path,
    options: &LoadOptions,
) -> Result<Dataset, DatasetError> {
    let (categories, compositions) = load_compositions(comp_path)?;
    let sites = load_sites(sites_path, &compositions)?;
    let observations = load_observations(obs_path, &sites, options)?;
    Ok(Dataset {
        sites,
        observations,
        compositions,
        categories,
    })
}

fn load_compositions(path: &Path) -> Result<(Vec<String>, Vec<LandUseComposition>), DatasetError> {
    let table = Table::read(path)?;
    let id_col = table.column("catchment_id")?;
    let category_cols: Vec<usize> = (0..table.headers.len()).filter(|&c| c != id_col).collect();
    if category_cols.is_empty() {
        return Err(DatasetError::NoCategories { file: table.file });
    }
    let categories = category_cols
        .iter()
        .map(|&c| table.headers[c].to_string())
        .collect();
    let mut seen = HashSet::new();
    let mut compositions = Vec::with_capacity(table.rows.len());
    for (row, record) in &table.rows {
        let catchment_id = record.get(id_col).unwrap_or("").to_string();
        if !seen.insert(catchment_id.clone()) {
            return Err(DatasetError::DuplicateCatchment {
                file: table.file.clone(),
                row: *row,
                catchment_id,
            });
        }
        let mut proportions = Vec::with_capacity(category_cols.len());
        for &c in &category_cols {
            let p = table.float(*row, record, c)?;
            if p < 0.0 {
                return Err(DatasetError::NegativeProportion {
                    file: table.file.clone(),
                    row: *row,
                    column: table.headers[c].to_string(),
                });
            }
            proportions.push(p);
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > COMPOSITION_TOLERANCE {
            return Err(DatasetError::CompositionNotNormalized {
                file: table.file.clone(),
                row: *row,
                sum,
            });
        }
        compositions.push(LandUseComposition {
            catchment_id,
            proportions,
        });
    }
    Ok((categories, compositions))
}

fn load_sites(path: &Path, compositions: &[LandUseComposition]) -> Result<Vec<Site>, DatasetError> {
    let table = Table::read(path)?;
    let id_col = table.column("site_id")?;
    let x_col = table.column("x")?;
    let y_col = table.column("y")?;
    let catchment_col = table.column("catchment_id")?;
    let catchments: HashSet<&str> = compositions.iter().map(|c| c.catchment_id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut sites = Vec::with_capacity(table.rows.len());
    for (row, record) in &table.rows {
        let site_id = record.get(id_col).unwrap_or("").to_string();
        if !seen.insert(site_id.clone()) {
            return Err(DatasetError::DuplicateSite {
                file: table.file.clone(),
                row: *row,
                site_id,
            });
        }
        let x = table.float(*row, record, x_col)?;
        let y = table.float(*row, record, y_col)?;
        let catchment_id = record.get(catchment_col).unwrap_or("").to_string();
        if !catchments.contains(catchment_id.as_str()) {
            return Err(DatasetError::UnknownCatchment {
                file: table.file.clone(),
                row: *row,
                catchment_id,
            });
        }
        sites.push(Site {
            site_id,
            x,
            y,
            catchment_id,
        });
    }
    Ok(sites)
}

fn load_observations(
    path: &Path,
    sites: &[Site],
    options: &LoadOptions,
) -> Result<Vec<Observation>, DatasetError> {
    let table = Table::read(path)?;
    let id_col = table.column("site_id")?;
    let date_col = table.column("date")?;
    let value_col = table.column("value")?;
    let site_order: HashMap<&str, usize> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.site_id.as_str(), i))
        .collect();
    // (site index, date) -> (sum, count)
    let mut bins: BTreeMap<(usize, NaiveDate), (f64, usize)> = BTreeMap::new();
    for (row, record) in &table.rows {
        let site_id = record.get(id_col).unwrap_or("");
        let Some(&site) = site_order.get(site_id) else {
            return Err(DatasetError::UnknownSiteReference {
                file: table.file.clone(),
                row: *row,
                site_id: site_id.to_string(),
            });
        };
        let raw_date = record.get(date_col).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| DatasetError::Parse {
            file: table.file.clone(),
            row: *row,
            column: "date".into(),
            value: raw_date.to_string(),
        })?;
        let mut value = table.float(*row, record, value_col)?;
        if options.log_transform {
            value = value.ln();
            if !value.is_finite() {
                return Err(DatasetError::NonFiniteValue {
                    file: table.file.clone(),
                    row: *row,
                    column: "value".into(),
                });
            }
        }
        let entry = bins.entry((site, date)).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    Ok(bins
        .into_iter()
        .map(|((site, date), (sum, count))| Observation {
            site_id: sites[site].site_id.clone(),
            date,
            value: sum / count as f64,
        })
        .collect())
}

/// Writes the three ingestion tables. Floats use the shortest round-trip
/// representation, so `load_dataset` recovers identical values.
pub fn save_dataset(
    dataset: &Dataset,
    sites_path: &Path,
    obs_path: &Path,
    comp_path: &Path,
) -> Result<(), DatasetError> {
    let io_err = |file: &Path| {
        let file = file.display().to_string();
        move |source: csv::Error| DatasetError::Csv {
            file: file.clone(),
            source,
        }
    };

    let mut w = csv::Writer::from_path(sites_path).map_err(io_err(sites_path))?;
    w.write_record(["site_id", "x", "y", "catchment_id"])
        .map_err(io_err(sites_path))?;
    for s in &dataset.sites {
        w.write_record([
            s.site_id.clone(),
            s.x.to_string(),
            s.y.to_string(),
            s.catchment_id.clone(),
        ])
        .map_err(io_err(sites_path))?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        file: sites_path.display().to_string(),
        source,
    })?;

    let mut w = csv::Writer::from_path(obs_path).map_err(io_err(obs_path))?;
    w.write_record(["site_id", "date", "value"])
        .map_err(io_err(obs_path))?;
    for o in &dataset.observations {
        w.write_record([
            o.site_id.clone(),
            o.date.format("%Y-%m-%d").to_string(),
            o.value.to_string(),
        ])
        .map_err(io_err(obs_path))?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        file: obs_path.display().to_string(),
        source,
    })?;

    let mut w = csv::Writer::from_path(comp_path).map_err(io_err(comp_path))?;
    let mut header = vec!["catchment_id".to_string()];
    header.extend(dataset.categories.iter().cloned());
    w.write_record(&header).map_err(io_err(comp_path))?;
    for c in &dataset.compositions {
        let mut record = vec![c.catchment_id.clone()];
        record.extend(c.proportions.iter().map(|p| p.to_string()));
        w.write_record(&record).map_err(io_err(comp_path))?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        file: comp_path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Regular grids

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Linear interpolation between the nearest filled bins.
    Linear,
    /// Carry the last filled bin forward.
    Previous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub step_days: i64,
    pub fill: FillPolicy,
    /// Largest tolerated share of empty interior bins.
    pub max_empty_fraction: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            step_days: 7,
            fill: FillPolicy::Linear,
            max_empty_fraction: 0.3,
        }
    }
}

/// A series on a fixed grid `start + i * step_days`, gaps filled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularSeries {
    pub site_id: String,
    pub start: NaiveDate,
    pub step_days: i64,
    pub values: Vec<f64>,
    /// `true` where the bin held at least one raw observation.
    pub observed: Vec<bool>,
}

impl RegularSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> NaiveDate {
        self.start + chrono::Duration::days(self.step_days * self.values.len() as i64)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("{empty} of {interior} interior bins are empty")]
    TooSparse { empty: usize, interior: usize },
    #[error("grid step must be positive, got {0} days")]
    BadStep(i64),
}

/// Bins observations onto a grid anchored at the earliest observation.
pub fn regularize_series(obs: &[Observation], options: &GridOptions) -> Result<RegularSeries, SeriesError> {
    let anchor = obs
        .iter()
        .map(|o| o.date)
        .min()
        .ok_or(SeriesError::TooFewObservations(0))?;
    regularize_on_grid(obs, anchor, options)
}

/// Bins observations onto the grid `anchor + i * step`. The returned series
/// starts at the first non-empty bin and ends at the last one.
pub fn regularize_on_grid(
    obs: &[Observation],
    anchor: NaiveDate,
    options: &GridOptions,
) -> Result<RegularSeries, SeriesError> {
    if options.step_days <= 0 {
        return Err(SeriesError::BadStep(options.step_days));
    }
    if obs.len() < 2 {
        return Err(SeriesError::TooFewObservations(obs.len()));
    }
    let mut sorted: Vec<&Observation> = obs.iter().collect();
    sorted.sort_by_key(|o| o.date);
    let bin_of = |d: NaiveDate| (d - anchor).num_days().div_euclid(options.step_days);
    let first = bin_of(sorted[0].date);
    let last = bin_of(sorted[sorted.len() - 1].date);
    let len = (last - first + 1) as usize;
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for o in &sorted {
        let b = (bin_of(o.date) - first) as usize;
        sums[b] += o.value;
        counts[b] += 1;
    }
    let observed: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let interior = len.saturating_sub(2);
    let empty = observed.iter().filter(|&&o| !o).count();
    if interior > 0 && empty as f64 > options.max_empty_fraction * interior as f64 {
        return Err(SeriesError::TooSparse { empty, interior });
    }
    let mut values: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    fill_gaps(&mut values, &observed, options.fill);
    let site_id = sorted[0].site_id.clone();
    Ok(RegularSeries {
        site_id,
        start: anchor + chrono::Duration::days(first * options.step_days),
        step_days: options.step_days,
        values,
        observed,
    })
}

fn fill_gaps(values: &mut [f64], observed: &[bool], fill: FillPolicy) {
    let mut prev: Option<usize> = None;
    let mut i = 0;
    while i < values.len() {
        if observed[i] {
            prev = Some(i);
            i += 1;
            continue;
        }
        let next = (i..values.len()).find(|&j| observed[j]);
        match (prev, next) {
            (Some(a), Some(b)) => {
                for j in i..b {
                    values[j] = match fill {
                        FillPolicy::Linear => {
                            values[a] + (values[b] - values[a]) * (j - a) as f64 / (b - a) as f64
                        }
                        FillPolicy::Previous => values[a],
                    };
                }
                i = b;
            }
            // Leading and trailing bins are always observed by construction.
            _ => unreachable!("gap at series boundary"),
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

/// One violated invariant. Serialises to a single JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub code: String,
    pub file: String,
    /// Position in the canonical file layout (header is row 1).
    pub row: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.entries.iter().any(|e| e.code == code)
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serialises"));
            out.push('\n');
        }
        out
    }

    fn push(&mut self, code: &str, file: &str, row: Option<u64>, detail: impl Into<String>) {
        self.entries.push(ValidationEntry {
            code: code.to_string(),
            file: file.to_string(),
            row,
            detail: detail.into(),
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub grid: GridOptions,
    pub period: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            grid: GridOptions::default(),
            period: 52,
        }
    }
}

/// Lists every violated invariant; an empty report means the dataset is
/// ready for fitting.
pub fn validate_dataset(d: &Dataset, options: &ValidationOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = d.categories.len();
    if k < 2 {
        report.push(
            "too_few_categories",
            LANDUSE_FILE,
            Some(1),
            format!("mixture requires K ≥ 2, found {k}"),
        );
    }

    let mut catchments = HashSet::new();
    for (i, c) in d.compositions.iter().enumerate() {
        let row = Some(i as u64 + 2);
        if !catchments.insert(c.catchment_id.as_str()) {
            report.push("duplicate_catchment", LANDUSE_FILE, row, c.catchment_id.clone());
        }
        if c.proportions.len() != k {
            report.push(
                "category_mismatch",
                LANDUSE_FILE,
                row,
                format!("{} proportions for {k} categories", c.proportions.len()),
            );
        }
        if c.proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            report.push("negative_proportion", LANDUSE_FILE, row, "proportions must be finite and ≥ 0");
        }
        let sum: f64 = c.proportions.iter().sum();
        if (sum - 1.0).abs() > COMPOSITION_TOLERANCE {
            report.push(
                "composition_not_normalized",
                LANDUSE_FILE,
                row,
                format!("proportions sum to {sum}"),
            );
        }
    }

    let mut site_ids = HashSet::new();
    for (i, s) in d.sites.iter().enumerate() {
        let row = Some(i as u64 + 2);
        if !site_ids.insert(s.site_id.as_str()) {
            report.push("duplicate_site", SITES_FILE, row, s.site_id.clone());
        }
        if !s.x.is_finite() || !s.y.is_finite() {
            report.push("non_finite_coordinate", SITES_FILE, row, s.site_id.clone());
        }
        if !catchments.contains(s.catchment_id.as_str()) {
            report.push(
                "unknown_catchment",
                SITES_FILE,
                row,
                format!("site {} references {}", s.site_id, s.catchment_id),
            );
        }
    }

    let mut seen_obs = HashSet::new();
    for (i, o) in d.observations.iter().enumerate() {
        let row = Some(i as u64 + 2);
        if !site_ids.contains(o.site_id.as_str()) {
            report.push("unknown_site", OBSERVATIONS_FILE, row, o.site_id.clone());
        }
        if !o.value.is_finite() {
            report.push("non_finite_value", OBSERVATIONS_FILE, row, o.site_id.clone());
        }
        if !seen_obs.insert((o.site_id.as_str(), o.date)) {
            report.push(
                "duplicate_observation",
                OBSERVATIONS_FILE,
                row,
                format!("{} on {}", o.site_id, o.date),
            );
        }
    }

    let min_len = 2 * options.period;
    let mut windows = Vec::new();
    for (i, obs) in d.observations_by_site().iter().enumerate() {
        let site = &d.sites[i];
        let row = Some(i as u64 + 2);
        match regularize_series(obs, &options.grid) {
            Ok(series) => {
                if series.len() < min_len {
                    report.push(
                        "insufficient_cycles",
                        SITES_FILE,
                        row,
                        format!(
                            "insufficient cycles for STL: site {} has {} bins, needs {min_len}",
                            site.site_id,
                            series.len()
                        ),
                    );
                }
                windows.push((series.start, series.end()));
            }
            Err(SeriesError::TooFewObservations(n)) => report.push(
                "no_observations",
                SITES_FILE,
                row,
                format!("site {} has {n} observations", site.site_id),
            ),
            Err(e) => report.push("too_sparse", SITES_FILE, row, format!("site {}: {e}", site.site_id)),
        }
    }
    if windows.len() == d.sites.len() && !windows.is_empty() {
        let start = windows.iter().map(|w| w.0).max().unwrap();
        let end = windows.iter().map(|w| w.1).min().unwrap();
        let span = (end - start).num_days();
        let bins = if span > 0 { span / options.grid.step_days } else { 0 };
        if (bins as usize) < min_len {
            report.push(
                "window_too_short",
                OBSERVATIONS_FILE,
                None,
                format!("common time window holds {bins} bins, needs {min_len}"),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn obs(site: &str, d: NaiveDate, value: f64) -> Observation {
        Observation {
            site_id: site.into(),
            date: d,
            value,
        }
    }

    fn weekly(site: &str, values: &[f64]) -> Vec<Observation> {
        let start = date("2010-01-04");
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| obs(site, start + chrono::Duration::days(7 * i as i64), v))
            .collect()
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn minimal(dir: &Path, extra_obs: &str, landuse: &str) -> Result<Dataset, DatasetError> {
        let sites = write(dir, "sites.csv", "site_id,x,y,catchment_id\nA,0,0,C1\nB,10,5,C2\n");
        let mut body = String::from("site_id,date,value\n");
        for w in 0..3 {
            let d = date("2010-01-04") + chrono::Duration::days(7 * w);
            body.push_str(&format!("A,{d},1.5\nB,{d},2.5\n"));
        }
        body.push_str(extra_obs);
        let obs = write(dir, "observations.csv", &body);
        let comp = write(dir, "landuse.csv", landuse);
        load_dataset(&sites, &obs, &comp, &LoadOptions::default())
    }

    const LANDUSE: &str = "catchment_id,forest,pasture\nC1,0.3,0.7\nC2,1.0,0.0\n";

    #[test]
    fn loads_minimal_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let d = minimal(dir.path(), "", LANDUSE).unwrap();
        assert_eq!(d.n_categories(), 2);
        assert_eq!(d.sites.len(), 2);
        assert_eq!(d.observations.len(), 6);
        assert_eq!(d.site_compositions().unwrap()[0], vec![0.3, 0.7]);
    }

    #[test]
    fn unknown_site_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        // 6 data rows occupy lines 2..=7, so X9 sits on line 8.
        let err = minimal(dir.path(), "X9,2010-02-01,1.0\n", LANDUSE).unwrap_err();
        match err {
            DatasetError::UnknownSiteReference { site_id, row, .. } => {
                assert_eq!(site_id, "X9");
                assert_eq!(row, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unnormalized_composition_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = minimal(dir.path(), "", "catchment_id,a,b\nC1,0.5,0.6\nC2,0.5,0.5\n").unwrap_err();
        assert!(matches!(err, DatasetError::CompositionNotNormalized { row: 2, .. }), "{err}");
    }

    #[test]
    fn missing_and_non_finite_columns() {
        let dir = tempfile::tempdir().unwrap();
        let err = minimal(dir.path(), "", "catchment,a,b\nC1,0.5,0.5\n").unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn { ref column, .. } if column == "catchment_id"));
        let err = minimal(dir.path(), "A,2010-03-01,NaN\n", LANDUSE).unwrap_err();
        assert!(matches!(err, DatasetError::NonFiniteValue { row: 8, ref column, .. } if column == "value"));
    }

    #[test]
    fn duplicates_collapse_by_mean() {
        let dir = tempfile::tempdir().unwrap();
        let d = minimal(dir.path(), "A,2010-01-04,3.5\n", LANDUSE).unwrap();
        let first = d.observations.iter().find(|o| o.site_id == "A").unwrap();
        assert_eq!(first.value, 2.5);
        assert_eq!(d.observations.len(), 6);
    }

    #[test]
    fn log_flag_transforms_values() {
        let dir = tempfile::tempdir().unwrap();
        let sites = write(dir.path(), "s.csv", "site_id,x,y,catchment_id\nA,0,0,C1\n");
        let obs = write(dir.path(), "o.csv", "site_id,date,value\nA,2010-01-04T09:30:00,2.718281828459045\n");
        let comp = write(dir.path(), "l.csv", "catchment_id,a,b\nC1,0.5,0.5\n");
        let d = load_dataset(&sites, &obs, &comp, &LoadOptions { log_transform: true }).unwrap();
        assert!((d.observations[0].value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn on_grid_series_unchanged() {
        let values = [1.0, 4.0, 2.0, 8.0, 5.0];
        let s = regularize_series(&weekly("A", &values), &GridOptions::default()).unwrap();
        assert_eq!(s.values, values);
        assert!(s.observed.iter().all(|&o| o));
    }

    #[test]
    fn same_bin_takes_mean() {
        let start = date("2010-01-04");
        let o = vec![
            obs("A", start, 1.0),
            obs("A", start + chrono::Duration::days(3), 3.0),
            obs("A", start + chrono::Duration::days(7), 5.0),
        ];
        let s = regularize_series(&o, &GridOptions::default()).unwrap();
        assert_eq!(s.values, vec![2.0, 5.0]);
    }

    #[test]
    fn interior_gap_is_interpolated() {
        let mut o = weekly("A", &[0.0, 1.0, 1.5, 2.0, -1.0, -1.0, 8.0, 3.0, 2.0, 1.0]);
        o.retain(|x| x.value != -1.0);
        let s = regularize_series(&o, &GridOptions::default()).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s.values[4] - 4.0).abs() < 1e-12);
        assert!((s.values[5] - 6.0).abs() < 1e-12);
        assert!(!s.observed[4] && !s.observed[5]);

        let prev = GridOptions {
            fill: FillPolicy::Previous,
            ..GridOptions::default()
        };
        let s = regularize_series(&o, &prev).unwrap();
        assert_eq!(&s.values[4..6], &[2.0, 2.0]);
    }

    #[test]
    fn sparse_series_rejected() {
        let o = weekly("A", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let kept = vec![o[0].clone(), o[1].clone(), o[5].clone()];
        assert_eq!(
            regularize_series(&kept, &GridOptions::default()),
            Err(SeriesError::TooSparse { empty: 3, interior: 4 })
        );
        let lenient = GridOptions {
            max_empty_fraction: 0.8,
            ..GridOptions::default()
        };
        assert!(regularize_series(&kept, &lenient).is_ok());
    }

    #[test]
    fn grid_spans_window_exactly() {
        let start = date("2010-01-06");
        let o = vec![obs("A", start, 1.0), obs("A", start + chrono::Duration::days(30), 2.0)];
        let lenient = GridOptions {
            max_empty_fraction: 1.0,
            ..GridOptions::default()
        };
        let s = regularize_series(&o, &lenient).unwrap();
        assert_eq!(s.start, start);
        assert_eq!(s.len(), 5);
        assert!(s.end() > o[1].date && s.end() - chrono::Duration::days(7) <= o[1].date);
    }

    fn fit_ready(weeks: usize) -> Dataset {
        let values: Vec<f64> = (0..weeks).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut observations = weekly("A", &values);
        observations.extend(weekly("B", &values));
        Dataset {
            sites: vec![
                Site { site_id: "A".into(), x: 0.0, y: 0.0, catchment_id: "C1".into() },
                Site { site_id: "B".into(), x: 1.0, y: 0.0, catchment_id: "C1".into() },
            ],
            observations,
            compositions: vec![LandUseComposition { catchment_id: "C1".into(), proportions: vec![0.4, 0.6] }],
            categories: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn validation_report_entries() {
        assert!(validate_dataset(&fit_ready(110), &ValidationOptions::default()).is_empty());

        let short = fit_ready(3);
        let report = validate_dataset(&short, &ValidationOptions::default());
        assert!(report.has_code("insufficient_cycles"));
        assert!(report.entries[0].detail.contains("insufficient cycles for STL"));

        let mut single = fit_ready(110);
        single.categories.truncate(1);
        single.compositions[0].proportions = vec![1.0];
        let report = validate_dataset(&single, &ValidationOptions::default());
        assert_eq!(report.entries.len(), 1);
        assert!(report.entries[0].detail.contains("mixture requires K ≥ 2"));
        let line = report.to_json_lines();
        let parsed: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(parsed["code"], "too_few_categories");
        assert_eq!(parsed["file"], LANDUSE_FILE);
    }
}
