//! Survey preference records and their calibration to Ramsey parameters.
//!
//! Respondents carry composite time and risk indices. These are mapped
//! linearly onto the pure rate of time preference `rho` and the elasticity of
//! marginal utility `eta`, such that the 5th and 95th percentiles of the
//! country-average indices land on expert-survey anchors. Negative results
//! are clamped to zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const TIME_INDEX_RANGE: (f64, f64) = (-1.3, 2.8);
pub const RISK_INDEX_RANGE: (f64, f64) = (-1.9, 2.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub fn parse_lenient(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "man" | "men" => Gender::Male,
            "female" | "f" | "woman" | "women" => Gender::Female,
            _ => Gender::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    /// Position in the source file (data rows, from 0).
    pub row: usize,
    pub country: String,
    pub time_index: f64,
    pub risk_index: f64,
    pub gender: Gender,
    pub age: Option<f64>,
    pub weight: f64,
    /// Pure rate of time preference, per year. Set by calibration.
    pub rho: Option<f64>,
    /// Elasticity of marginal utility. Set by calibration.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub records: Vec<PreferenceRecord>,
    /// Rows dropped because the time or risk index was missing.
    pub dropped_missing: usize,
    pub row_errors: Vec<RowError>,
    /// Records kept although an index lies outside its documented range.
    pub range_warnings: usize,
}

const PREFERENCE_COLUMNS: [&str; 6] = ["country", "time_index", "risk_index", "gender", "age", "weight"];

fn is_missing(raw: &str) -> bool {
    matches!(
        raw.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "." | "null"
    )
}

/// Loads survey records from CSV with columns
/// `country,time_index,risk_index,gender,age,weight`.
///
/// Rows missing either index are dropped and counted. Malformed rows are
/// reported and skipped. A file with no usable rows is an error.
pub fn load_preferences(path: impl AsRef<Path>) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing: Vec<&str> = PREFERENCE_COLUMNS
        .iter()
        .copied()
        .filter(|c| col(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("missing columns: {}", missing.join(", ")),
        });
    }
    let [c_country, c_time, c_risk, c_gender, c_age, c_weight] =
        PREFERENCE_COLUMNS.map(|c| col(c).unwrap());

    let mut report = LoadReport {
        records: Vec::new(),
        dropped_missing: 0,
        row_errors: Vec::new(),
        range_warnings: 0,
    };
    let mut rows_seen = 0;
    for (i, rec) in reader.records().enumerate() {
        rows_seen += 1;
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let get = |c: usize| rec.get(c).unwrap_or("");
        if is_missing(get(c_time)) || is_missing(get(c_risk)) {
            report.dropped_missing += 1;
            continue;
        }
        match parse_row(&rec, [c_country, c_time, c_risk, c_gender, c_age, c_weight]) {
            Ok(mut r) => {
                r.row = report.records.len();
                let out_of_range = !in_range(r.time_index, TIME_INDEX_RANGE)
                    || !in_range(r.risk_index, RISK_INDEX_RANGE);
                if out_of_range {
                    report.range_warnings += 1;
                    warn!(
                        "{}:{line}: index outside documented range (time {}, risk {})",
                        path.display(),
                        r.time_index,
                        r.risk_index
                    );
                }
                report.records.push(r);
            }
            Err(message) => report.row_errors.push(RowError { line, message }),
        }
    }
    if rows_seen == 0 {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    if !report.row_errors.is_empty() {
        warn!(
            "{}: {} malformed rows skipped",
            path.display(),
            report.row_errors.len()
        );
    }
    Ok(report)
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

fn parse_row(rec: &csv::StringRecord, cols: [usize; 6]) -> std::result::Result<PreferenceRecord, String> {
    let [c_country, c_time, c_risk, c_gender, c_age, c_weight] = cols;
    let get = |c: usize| rec.get(c).unwrap_or("").trim();
    let num = |c: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = get(c);
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("cannot parse {name} = {raw:?}"))
    };
    let country = get(c_country);
    if country.is_empty() {
        return Err("missing country".into());
    }
    let weight = num(c_weight, "weight")?;
    if weight <= 0.0 {
        return Err(format!("weight must be positive, found {weight}"));
    }
    let age = if is_missing(get(c_age)) {
        None
    } else {
        Some(num(c_age, "age")?)
    };
    Ok(PreferenceRecord {
        row: 0,
        country: country.to_string(),
        time_index: num(c_time, "time_index")?,
        risk_index: num(c_risk, "risk_index")?,
        gender: Gender::parse_lenient(get(c_gender)),
        age,
        weight,
        rho: None,
        eta: None,
    })
}

/// Writes records with appended `rho,eta` columns.
pub fn write_calibrated(records: &[PreferenceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "country", "time_index", "risk_index", "gender", "age", "weight", "rho", "eta",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.country.clone(),
            r.time_index.to_string(),
            r.risk_index.to_string(),
            r.gender.to_string(),
            opt(r.age),
            r.weight.to_string(),
            opt(r.rho),
            opt(r.eta),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationVariant {
    Base,
    PopulationWeighted,
    GeoRestricted,
}

impl CalibrationVariant {
    pub const ALL: [CalibrationVariant; 3] = [
        CalibrationVariant::Base,
        CalibrationVariant::PopulationWeighted,
        CalibrationVariant::GeoRestricted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CalibrationVariant::Base => "base",
            CalibrationVariant::PopulationWeighted => "population_weighted",
            CalibrationVariant::GeoRestricted => "geo_restricted",
        }
    }
}

impl fmt::Display for CalibrationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibrationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalibrationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown calibration variant {s:?}")))
    }
}

/// Whether a higher index means a higher (direct) or lower (inverted)
/// parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexOrientation {
    #[default]
    Direct,
    Inverted,
}

/// Expert-survey percentiles the lay distribution is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertAnchors {
    pub rho_q5: f64,
    pub rho_q95: f64,
    pub eta_q5: f64,
    pub eta_q95: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSetup {
    pub anchors: Option<ExpertAnchors>,
    #[serde(default)]
    pub time_orientation: IndexOrientation,
    #[serde(default)]
    pub risk_orientation: IndexOrientation,
    /// Countries kept by the geographically restricted variant.
    #[serde(default)]
    pub region: Vec<String>,
    /// National populations, for the population-weighted variant.
    #[serde(skip)]
    pub population: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Two-point fit sending `lay_q5 -> target_at_q5` and `lay_q95 -> target_at_q95`.
    fn through(lay_q5: f64, lay_q95: f64, target_at_q5: f64, target_at_q95: f64) -> Self {
        let slope = (target_at_q95 - target_at_q5) / (lay_q95 - lay_q5);
        LinearMap {
            slope,
            intercept: target_at_q5 - slope * lay_q5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub variant: CalibrationVariant,
    pub rho: LinearMap,
    pub eta: LinearMap,
    pub anchors: ExpertAnchors,
    /// Lay 5th/95th percentiles of the country-average time index.
    pub lay_time: (f64, f64),
    /// Lay 5th/95th percentiles of the country-average risk index.
    pub lay_risk: (f64, f64),
    pub countries: usize,
}

/// Sample-weighted country means of the time and risk indices, sorted by
/// country code.
pub fn country_averages(records: &[PreferenceRecord]) -> BTreeMap<String, (f64, f64, f64)> {
    let mut acc: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.country.clone()).or_insert((0.0, 0.0, 0.0));
        e.0 += r.weight * r.time_index;
        e.1 += r.weight * r.risk_index;
        e.2 += r.weight;
    }
    acc.into_iter()
        .map(|(c, (t, k, w))| (c, (t / w, k / w, w)))
        .collect()
}

/// Fits the linear maps from indices to `(rho, eta)`.
pub fn fit_calibration(
    records: &[PreferenceRecord],
    setup: &CalibrationSetup,
    variant: CalibrationVariant,
) -> Result<CalibrationMap> {
    let anchors = setup
        .anchors
        .ok_or_else(|| Error::Config("expert anchors are not configured".into()))?;
    if !(anchors.rho_q95 > anchors.rho_q5) || !(anchors.eta_q95 > anchors.eta_q5) {
        return Err(Error::Calibration(
            "expert anchors need q95 > q5 for both rho and eta".into(),
        ));
    }
    let mut averages = country_averages(records);
    if variant == CalibrationVariant::GeoRestricted {
        let region: BTreeSet<&str> = setup.region.iter().map(String::as_str).collect();
        if region.is_empty() {
            return Err(Error::Config("geo_restricted calibration needs a region list".into()));
        }
        averages.retain(|c, _| region.contains(c.as_str()));
    }
    if averages.len() < 2 {
        return Err(Error::Calibration(format!(
            "calibration needs at least 2 countries, found {}",
            averages.len()
        )));
    }
    let weights: Vec<f64> = match variant {
        CalibrationVariant::PopulationWeighted => {
            let missing: Vec<String> = averages
                .keys()
                .filter(|c| !setup.population.contains_key(*c))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingWeights(missing));
            }
            averages.keys().map(|c| setup.population[c]).collect()
        }
        _ => vec![1.0; averages.len()],
    };
    let time: Vec<f64> = averages.values().map(|v| v.0).collect();
    let risk: Vec<f64> = averages.values().map(|v| v.1).collect();
    let q = |xs: &[f64], p: f64| stats::weighted_quantile(xs, &weights, p).unwrap();
    let lay_time = (q(&time, 0.05), q(&time, 0.95));
    let lay_risk = (q(&risk, 0.05), q(&risk, 0.95));
    for (name, (lo, hi)) in [("time", lay_time), ("risk", lay_risk)] {
        if !(hi > lo) {
            return Err(Error::Calibration(format!(
                "degenerate lay spread for the {name} index (q5 = q95 = {lo})"
            )));
        }
    }
    let map_for = |lay: (f64, f64), q5: f64, q95: f64, o: IndexOrientation| match o {
        IndexOrientation::Direct => LinearMap::through(lay.0, lay.1, q5, q95),
        IndexOrientation::Inverted => LinearMap::through(lay.0, lay.1, q95, q5),
    };
    Ok(CalibrationMap {
        variant,
        rho: map_for(lay_time, anchors.rho_q5, anchors.rho_q95, setup.time_orientation),
        eta: map_for(lay_risk, anchors.eta_q5, anchors.eta_q95, setup.risk_orientation),
        anchors,
        lay_time,
        lay_risk,
        countries: averages.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampReport {
    pub rho_zeros: usize,
    pub eta_zeros: usize,
    /// Sample-weighted share of records with `rho` clamped to zero.
    pub rho_zero_share: f64,
    pub eta_zero_share: f64,
}

/// Fills `rho` and `eta` on every record, clamping negatives to zero.
pub fn apply_calibration(map: &CalibrationMap, records: &mut [PreferenceRecord]) -> ClampReport {
    let mut rho_zeros = 0;
    let mut eta_zeros = 0;
    let mut w_rho = 0.0;
    let mut w_eta = 0.0;
    let mut total = 0.0;
    for r in records.iter_mut() {
        let rho = map.rho.apply(r.time_index).max(0.0);
        let eta = map.eta.apply(r.risk_index).max(0.0);
        total += r.weight;
        if rho == 0.0 {
            rho_zeros += 1;
            w_rho += r.weight;
        }
        if eta == 0.0 {
            eta_zeros += 1;
            w_eta += r.weight;
        }
        r.rho = Some(rho);
        r.eta = Some(eta);
    }
    ClampReport {
        rho_zeros,
        eta_zeros,
        rho_zero_share: if total > 0.0 { w_rho / total } else { 0.0 },
        eta_zero_share: if total > 0.0 { w_eta / total } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Country,
    Gender,
    /// Age bins of the given width in years, labelled by their lower edge.
    Age(u32),
}

impl Grouping {
    /// Group label for a record, or `None` when the key is unavailable.
    pub fn key(&self, r: &PreferenceRecord) -> Option<String> {
        match self {
            Grouping::Country => Some(r.country.clone()),
            Grouping::Gender => Some(r.gender.to_string()),
            Grouping::Age(width) => r.age.map(|a| {
                let w = (*width).max(1) as f64;
                format!("{}", ((a / w).floor() * w) as i64)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub weight: f64,
    pub rho_mean: f64,
    pub rho_sd: f64,
    pub rho_zero_share: f64,
    pub eta_mean: f64,
    pub eta_sd: f64,
    pub eta_zero_share: f64,
}

/// Weighted mean, standard deviation and zero share of `rho` and `eta` per
/// group. Uncalibrated records are skipped.
pub fn summarize_preferences(records: &[PreferenceRecord], grouping: Grouping) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<String, Vec<&PreferenceRecord>> = BTreeMap::new();
    for r in records {
        if r.rho.is_none() || r.eta.is_none() {
            continue;
        }
        if let Some(k) = grouping.key(r) {
            groups.entry(k).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .filter_map(|(group, members)| {
            if members.is_empty() {
                warn!("group {group} is empty, omitted");
                return None;
            }
            let w: Vec<f64> = members.iter().map(|r| r.weight).collect();
            let rho: Vec<f64> = members.iter().map(|r| r.rho.unwrap()).collect();
            let eta: Vec<f64> = members.iter().map(|r| r.eta.unwrap()).collect();
            let total: f64 = w.iter().sum();
            let zero_share = |xs: &[f64]| {
                xs.iter().zip(&w).filter(|(x, _)| **x == 0.0).map(|(_, w)| w).sum::<f64>() / total
            };
            Some(GroupSummary {
                count: members.len(),
                weight: total,
                rho_mean: stats::weighted_mean(&rho, &w)?,
                rho_sd: stats::weighted_variance(&rho, &w)?.sqrt(),
                rho_zero_share: zero_share(&rho),
                eta_mean: stats::weighted_mean(&eta, &w)?,
                eta_sd: stats::weighted_variance(&eta, &w)?.sqrt(),
                eta_zero_share: zero_share(&eta),
                group,
            })
        })
        .collect()
}

/// Sample-weighted mean `(rho, eta)` of calibrated records.
pub fn mean_preferences<'a>(records: impl IntoIterator<Item = &'a PreferenceRecord>) -> Option<(f64, f64)> {
    let mut w = 0.0;
    let mut rho = 0.0;
    let mut eta = 0.0;
    for r in records {
        w += r.weight;
        rho += r.weight * r.rho?;
        eta += r.weight * r.eta?;
    }
    (w > 0.0).then(|| (rho / w, eta / w))
}
