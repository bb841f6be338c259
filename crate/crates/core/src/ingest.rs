//! Loading, validation, normalization and alignment of daily county series.
//!
//! Dates are kept as day offsets from a series' (or panel's) start date;
//! calendar dates only appear when reading and writing files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Known base variables; any of them may carry the `_per100k` suffix.
pub const KNOWN_VARIABLES: [&str; 5] = [
    "hospitalizations",
    "deaths",
    "temperature",
    "relative_humidity",
    "aod",
];

const CLINICAL: [&str; 2] = ["hospitalizations", "deaths"];
const PER_100K_SUFFIX: &str = "_per100k";

/// Five-digit county code; the first two digits identify the state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fips(String);

impl Fips {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Fips(s.to_string()))
        } else {
            Err(Error::InvalidFips(s.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn state(&self) -> &str {
        &self.0[..2]
    }
}

impl TryFrom<String> for Fips {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Fips::parse(&s)
    }
}

impl From<Fips> for String {
    fn from(f: Fips) -> String {
        f.0
    }
}

impl fmt::Display for Fips {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VariableId(String);

impl VariableId {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let base = s.strip_suffix(PER_100K_SUFFIX).unwrap_or(s);
        if KNOWN_VARIABLES.contains(&base) {
            Ok(VariableId(s.to_string()))
        } else {
            Err(Error::invalid(format!("unknown variable {s:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn base(&self) -> &str {
        self.0.strip_suffix(PER_100K_SUFFIX).unwrap_or(&self.0)
    }

    pub fn is_clinical(&self) -> bool {
        CLINICAL.contains(&self.base())
    }

    pub fn is_per_100k(&self) -> bool {
        self.0.ends_with(PER_100K_SUFFIX)
    }

    fn per_100k(&self) -> VariableId {
        VariableId(format!("{}{}", self.base(), PER_100K_SUFFIX))
    }
}

impl TryFrom<String> for VariableId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        VariableId::parse(&s)
    }
}

impl From<VariableId> for String {
    fn from(v: VariableId) -> String {
        v.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One county's daily series for one variable. `values[d]` is the value on
/// `start_date + d` days; `None` marks a missing day.
#[derive(Debug, Clone, PartialEq)]
pub struct CountySeries {
    pub fips: Fips,
    pub variable: VariableId,
    pub start_date: NaiveDate,
    pub values: Vec<Option<f64>>,
    pub population: Option<u64>,
}

impl CountySeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.values.len().saturating_sub(1) as u64)
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        let offset = (date - self.start_date).num_days();
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied().flatten()
    }
}

/// A row that failed validation and was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    /// 1-based line number in the file, counting the header.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub series: Vec<CountySeries>,
    pub rejected: Vec<RowDiagnostic>,
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    fips: String,
    date: String,
    variable: String,
    value: Option<String>,
    population: Option<String>,
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).map_err(|e| Error::Parse {
        line,
        message: format!("bad date {s:?}: {e}"),
    })
}

fn opt_field(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

/// Reads a `fips,date,variable,value,population` file.
///
/// Rows with a malformed FIPS code or unknown variable are rejected with a
/// diagnostic and the rest of the file is kept. Within one (fips, variable)
/// group dates must be strictly increasing; a repeated date or a step back is
/// a hard error. Gaps between dates become missing values.
pub fn load_series<R: Read>(reader: R) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut groups: BTreeMap<(Fips, VariableId), (Vec<(NaiveDate, Option<f64>)>, Option<u64>)> =
        BTreeMap::new();
    let mut rejected = Vec::new();

    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let line = i + 2;
        let row = row?;
        let fips = match Fips::parse(&row.fips) {
            Ok(f) => f,
            Err(e) => {
                rejected.push(RowDiagnostic { line, message: e.to_string() });
                continue;
            }
        };
        let variable = match VariableId::parse(&row.variable) {
            Ok(v) => v,
            Err(e) => {
                rejected.push(RowDiagnostic { line, message: e.to_string() });
                continue;
            }
        };
        let date = parse_date(&row.date, line)?;
        let value = match opt_field(&row.value) {
            None => None,
            Some(s) => Some(s.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad value {s:?}: {e}"),
            })?),
        };
        let population = match opt_field(&row.population) {
            None => None,
            Some(s) => Some(s.parse::<u64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad population {s:?}: {e}"),
            })?),
        };

        let entry = groups.entry((fips.clone(), variable.clone())).or_default();
        if let Some(&(prev, _)) = entry.0.last() {
            if date == prev {
                return Err(Error::DuplicateDate {
                    fips: fips.to_string(),
                    variable: variable.to_string(),
                    date: date.to_string(),
                });
            }
            if date < prev {
                return Err(Error::NonMonotoneDates {
                    fips: fips.to_string(),
                    variable: variable.to_string(),
                    date: date.to_string(),
                });
            }
        }
        entry.0.push((date, value));
        if entry.1.is_none() {
            entry.1 = population.filter(|&p| p > 0);
        }
    }

    let mut series = Vec::with_capacity(groups.len());
    for ((fips, variable), (rows, population)) in groups {
        let start_date = rows[0].0;
        let end = rows[rows.len() - 1].0;
        let len = (end - start_date).num_days() as usize + 1;
        let mut values = vec![None; len];
        for (date, v) in rows {
            values[(date - start_date).num_days() as usize] = v;
        }
        if variable.is_clinical() && population.is_none() {
            log::warn!("clinical series {fips}/{variable} has no population");
        }
        series.push(CountySeries { fips, variable, start_date, values, population });
    }
    for d in &rejected {
        log::warn!("rejected row: {d}");
    }
    Ok(LoadReport { series, rejected })
}

/// Rescales a clinical count series to a rate per 100k residents.
pub fn per_100k(series: &CountySeries) -> Result<CountySeries> {
    let population = series
        .population
        .filter(|&p| p > 0)
        .ok_or_else(|| Error::MissingPopulation(series.fips.to_string()))?;
    let scale = 100_000.0 / population as f64;
    Ok(CountySeries {
        fips: series.fips.clone(),
        variable: series.variable.per_100k(),
        start_date: series.start_date,
        values: series.values.iter().map(|v| v.map(|x| x * scale)).collect(),
        population: series.population,
    })
}

/// Applies [`per_100k`] to every clinical series that is not already a rate.
pub fn normalize_clinical(series: &[CountySeries]) -> Result<Vec<CountySeries>> {
    series
        .iter()
        .map(|s| {
            if s.variable.is_clinical() && !s.variable.is_per_100k() {
                per_100k(s)
            } else {
                Ok(s.clone())
            }
        })
        .collect()
}

/// Inclusive calendar interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("date range {start}..={end} is empty")));
        }
        Ok(Self { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn date_at(&self, offset: usize) -> NaiveDate {
        self.start + chrono::Days::new(offset as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Interior gaps take the previous day's value, leading gaps are zero.
    #[default]
    ForwardFill,
    /// Every gap is zero.
    Zero,
}

/// Dense `T × N × F` array of node features over an inclusive date range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePanel {
    pub county_order: Vec<Fips>,
    pub variable_order: Vec<String>,
    pub date_range: DateRange,
    /// Row-major `[t][n][f]`.
    pub data: Vec<f64>,
    /// Same layout as `data`; `true` where the value was imputed.
    pub mask: Vec<bool>,
}

impl FeaturePanel {
    pub fn days(&self) -> usize {
        self.date_range.days()
    }

    pub fn nodes(&self) -> usize {
        self.county_order.len()
    }

    pub fn features(&self) -> usize {
        self.variable_order.len()
    }

    /// Index of the last timestamp.
    pub fn tau(&self) -> usize {
        self.days() - 1
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.days(), self.nodes(), self.features())
    }

    fn offset(&self, t: usize, n: usize, f: usize) -> usize {
        (t * self.nodes() + n) * self.features() + f
    }

    pub fn get(&self, t: usize, n: usize, f: usize) -> f64 {
        self.data[self.offset(t, n, f)]
    }

    pub fn set(&mut self, t: usize, n: usize, f: usize, v: f64) {
        let o = self.offset(t, n, f);
        self.data[o] = v;
    }

    pub fn is_imputed(&self, t: usize, n: usize, f: usize) -> bool {
        self.mask[self.offset(t, n, f)]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_order.iter().position(|v| v == name)
    }

    pub fn county_index(&self, fips: &str) -> Option<usize> {
        self.county_order.iter().position(|c| c.as_str() == fips)
    }

    /// The series of one (county, variable) cell over time.
    pub fn column(&self, n: usize, f: usize) -> Vec<f64> {
        (0..self.days()).map(|t| self.get(t, n, f)).collect()
    }

    /// New panel with only the listed feature indices, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<FeaturePanel> {
        if let Some(&bad) = features.iter().find(|&&f| f >= self.features()) {
            return Err(Error::invalid(format!("feature index {bad} out of range")));
        }
        let (t_len, n_len, _) = self.shape();
        let mut data = Vec::with_capacity(t_len * n_len * features.len());
        let mut mask = Vec::with_capacity(data.capacity());
        for t in 0..t_len {
            for n in 0..n_len {
                for &f in features {
                    data.push(self.get(t, n, f));
                    mask.push(self.is_imputed(t, n, f));
                }
            }
        }
        Ok(FeaturePanel {
            county_order: self.county_order.clone(),
            variable_order: features.iter().map(|&f| self.variable_order[f].clone()).collect(),
            date_range: self.date_range,
            data,
            mask,
        })
    }

    /// Appends time-invariant channels, one value per county.
    pub fn with_static_channels(&self, names: &[String], values: &[Vec<f64>]) -> Result<FeaturePanel> {
        if values.len() != self.nodes() || values.iter().any(|v| v.len() != names.len()) {
            return Err(Error::invalid("static channel values must be N rows of len(names)"));
        }
        let (t_len, n_len, f_len) = self.shape();
        let width = f_len + names.len();
        let mut data = Vec::with_capacity(t_len * n_len * width);
        let mut mask = Vec::with_capacity(data.capacity());
        for t in 0..t_len {
            for (n, row) in values.iter().enumerate() {
                for f in 0..f_len {
                    data.push(self.get(t, n, f));
                    mask.push(self.is_imputed(t, n, f));
                }
                data.extend_from_slice(row);
                mask.extend(std::iter::repeat_n(false, names.len()));
            }
        }
        let mut variable_order = self.variable_order.clone();
        variable_order.extend(names.iter().cloned());
        Ok(FeaturePanel {
            county_order: self.county_order.clone(),
            variable_order,
            date_range: self.date_range,
            data,
            mask,
        })
    }
}

/// Aligns series onto the day grid of `range`.
///
/// Counties and variables are ordered by FIPS and by variable name. Every
/// (county, variable) combination that occurs anywhere in `series` must have
/// at least one observed day inside `range`.
pub fn align_panel(series: &[CountySeries], range: DateRange, impute: ImputePolicy) -> Result<FeaturePanel> {
    let counties: BTreeSet<&Fips> = series.iter().map(|s| &s.fips).collect();
    let variables: BTreeSet<&VariableId> = series.iter().map(|s| &s.variable).collect();
    let county_order: Vec<Fips> = counties.into_iter().cloned().collect();
    let variable_order: Vec<VariableId> = variables.into_iter().cloned().collect();

    let mut lookup: BTreeMap<(&Fips, &VariableId), &CountySeries> = BTreeMap::new();
    for s in series {
        if lookup.insert((&s.fips, &s.variable), s).is_some() {
            return Err(Error::invalid(format!("series {}/{} given twice", s.fips, s.variable)));
        }
    }

    let t_len = range.days();
    let (n_len, f_len) = (county_order.len(), variable_order.len());
    let mut data = vec![0.0; t_len * n_len * f_len];
    let mut mask = vec![true; data.len()];
    let mut missing = Vec::new();

    for (n, fips) in county_order.iter().enumerate() {
        for (f, var) in variable_order.iter().enumerate() {
            let Some(s) = lookup.get(&(fips, var)) else {
                missing.push((fips.to_string(), var.to_string()));
                continue;
            };
            let observed: Vec<Option<f64>> = (0..t_len)
                .map(|t| s.value_on(range.date_at(t)).filter(|v| v.is_finite()))
                .collect();
            if observed.iter().all(Option::is_none) {
                missing.push((fips.to_string(), var.to_string()));
                continue;
            }
            let mut last: Option<f64> = None;
            for (t, v) in observed.into_iter().enumerate() {
                let idx = (t * n_len + n) * f_len + f;
                match v {
                    Some(x) => {
                        data[idx] = x;
                        mask[idx] = false;
                        last = Some(x);
                    }
                    None => {
                        data[idx] = match impute {
                            ImputePolicy::ForwardFill => last.unwrap_or(0.0),
                            ImputePolicy::Zero => 0.0,
                        };
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSeries(missing));
    }
    Ok(FeaturePanel {
        county_order,
        variable_order: variable_order.into_iter().map(String::from).collect(),
        date_range: range,
        data,
        mask,
    })
}

/// Per-variable standardization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScale {
    pub mean: f64,
    pub std: f64,
    /// Zero variance over the fit window; the channel was left unscaled.
    pub degenerate: bool,
}

impl ChannelScale {
    pub fn apply(&self, v: f64) -> f64 {
        if self.degenerate {
            v
        } else {
            (v - self.mean) / self.std
        }
    }

    pub fn invert(&self, z: f64) -> f64 {
        if self.degenerate {
            z
        } else {
            z * self.std + self.mean
        }
    }
}

/// Standardizes each variable with the mean and population standard
/// deviation of the timestamps in `fit_range` (all counties pooled).
pub fn zscore(panel: &FeaturePanel, fit_range: Range<usize>) -> Result<(FeaturePanel, Vec<ChannelScale>)> {
    if fit_range.is_empty() || fit_range.end > panel.days() {
        return Err(Error::invalid(format!(
            "fit range {fit_range:?} must be non-empty and within 0..{}",
            panel.days()
        )));
    }
    let (_, n_len, f_len) = panel.shape();
    let count = (fit_range.len() * n_len) as f64;
    let mut scales = Vec::with_capacity(f_len);
    for f in 0..f_len {
        let mut sum = 0.0;
        for t in fit_range.clone() {
            for n in 0..n_len {
                sum += panel.get(t, n, f);
            }
        }
        let mean = sum / count;
        let mut ss = 0.0;
        for t in fit_range.clone() {
            for n in 0..n_len {
                let d = panel.get(t, n, f) - mean;
                ss += d * d;
            }
        }
        let std = (ss / count).sqrt();
        let degenerate = !(std > 1e-12 * mean.abs().max(1.0));
        scales.push(ChannelScale { mean, std, degenerate });
    }
    let mut out = panel.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        *v = scales[i % f_len].apply(*v);
    }
    Ok((out, scales))
}

pub fn inverse_zscore(panel: &FeaturePanel, scales: &[ChannelScale]) -> FeaturePanel {
    let f_len = panel.features();
    let mut out = panel.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        *v = scales[i % f_len].invert(*v);
    }
    out
}
