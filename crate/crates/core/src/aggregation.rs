//! Aggregation of individual SCCs: weighting schemes across countries,
//! distribution statistics, demographic slices and policy correlations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iam::MarginalDamagePath;
use crate::scc::{self, SccResult};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryWeight {
    pub country: String,
    pub population: f64,
    /// Output at market exchange rates.
    pub gdp_mer: f64,
    /// Per-capita income at purchasing power parity.
    pub income_pc_ppp: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountryWeights {
    pub by_country: BTreeMap<String, CountryWeight>,
}

impl CountryWeights {
    pub fn new(rows: impl IntoIterator<Item = CountryWeight>) -> Result<Self> {
        let mut by_country = BTreeMap::new();
        for r in rows {
            for (name, v) in [
                ("population", r.population),
                ("gdp_mer", r.gdp_mer),
                ("income_pc_ppp", r.income_pc_ppp),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("{name} for {} must be positive, got {v}", r.country)));
                }
            }
            if by_country.insert(r.country.clone(), r).is_some() {
                return Err(Error::Domain("duplicate country in weights table".into()));
            }
        }
        Ok(Self { by_country })
    }

    /// Reads a CSV with columns `country, population, gdp_mer, income_pc_ppp`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = rdr.headers()?.clone();
        for col in ["country", "population", "gdp_mer", "income_pc_ppp"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!("missing column {col:?}"),
                });
            }
        }
        let rows = rdr
            .deserialize::<CountryWeight>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn get(&self, country: &str) -> Option<&CountryWeight> {
        self.by_country.get(country)
    }

    /// Countries among `countries` without a weights row, sorted.
    pub fn missing<'a>(&self, countries: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut m: Vec<String> = countries
            .into_iter()
            .filter(|c| !self.by_country.contains_key(*c))
            .map(str::to_owned)
            .collect();
        m.sort();
        m.dedup();
        m
    }

    /// Population-weighted global mean per-capita PPP income.
    pub fn global_mean_income(&self) -> f64 {
        let pop: f64 = self.by_country.values().map(|w| w.population).sum();
        self.by_country.values().map(|w| w.population * w.income_pc_ppp).sum::<f64>() / pop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationScheme {
    /// Every respondent counts by their sample weight.
    Democracy,
    /// Country means, equally weighted.
    Un,
    /// Country means weighted by output at market exchange rates.
    Plutocracy,
    /// Country means weighted by global over national per-capita income.
    Welfare,
}

impl AggregationScheme {
    pub const ALL: [AggregationScheme; 4] = [
        AggregationScheme::Democracy,
        AggregationScheme::Un,
        AggregationScheme::Plutocracy,
        AggregationScheme::Welfare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationScheme::Democracy => "democracy",
            AggregationScheme::Un => "un",
            AggregationScheme::Plutocracy => "plutocracy",
            AggregationScheme::Welfare => "welfare",
        }
    }

    fn needs_weights(self) -> bool {
        matches!(self, AggregationScheme::Plutocracy | AggregationScheme::Welfare)
    }
}

impl fmt::Display for AggregationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AggregationScheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown aggregation scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WelfareOptions {
    /// Multiply the income ratio by the country's population share.
    #[serde(default)]
    pub population_scaling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRow {
    pub country: String,
    pub respondents: usize,
    pub weight: f64,
    pub rho_mean: f64,
    pub eta_mean: f64,
    /// SCC at the country's mean preferences.
    pub ref_scc: f64,
    /// Weighted mean of the country's individual SCCs.
    pub mean_scc: f64,
    pub premium: f64,
}

/// Per-country means, reference SCCs and premia, sorted by country code.
/// Country means of `rho` and `eta` use the calibrated (post-clamp) values.
pub fn country_table(results: &[SccResult], mdp: &MarginalDamagePath, growth: &[f64]) -> Result<Vec<CountryRow>> {
    let mut groups: BTreeMap<&str, Vec<SccResult>> = BTreeMap::new();
    for r in results {
        groups.entry(r.country.as_str()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(country, members)| {
            let s = scc::premium_summary(&members, mdp, growth)?;
            Ok(CountryRow {
                country: country.to_owned(),
                respondents: members.len(),
                weight: members.iter().map(|r| r.weight).sum(),
                rho_mean: s.ref_rho,
                eta_mean: s.ref_eta,
                ref_scc: s.ref_scc,
                mean_scc: s.mean_scc,
                premium: s.premium,
            })
        })
        .collect()
}

/// Scheme weight for each row of `table`, normalized to sum to one.
pub fn country_scheme_weights(
    table: &[CountryRow],
    weights: &CountryWeights,
    scheme: AggregationScheme,
    welfare: WelfareOptions,
) -> Result<Vec<f64>> {
    if scheme.needs_weights() {
        let missing = weights.missing(table.iter().map(|r| r.country.as_str()));
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
    }
    let raw: Vec<f64> = match scheme {
        AggregationScheme::Democracy => table.iter().map(|r| r.weight).collect(),
        AggregationScheme::Un => vec![1.0; table.len()],
        AggregationScheme::Plutocracy => table
            .iter()
            .map(|r| weights.get(&r.country).unwrap().gdp_mer)
            .collect(),
        AggregationScheme::Welfare => {
            let global = weights.global_mean_income();
            let pop_total: f64 = table
                .iter()
                .map(|r| weights.get(&r.country).unwrap().population)
                .sum();
            table
                .iter()
                .map(|r| {
                    let w = weights.get(&r.country).unwrap();
                    let ratio = global / w.income_pc_ppp;
                    if welfare.population_scaling {
                        ratio * w.population / pop_total
                    } else {
                        ratio
                    }
                })
                .collect()
        }
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain(format!("{scheme} weights sum to {total}")));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scheme: AggregationScheme,
    pub ref_scc: f64,
    pub mean_scc: f64,
    /// `mean_scc - ref_scc`.
    pub premium: f64,
    /// Percentile of `mean_scc` on the sample-weighted individual distribution.
    pub mean_percentile: f64,
    pub countries: Vec<CountryRow>,
}

/// Aggregates individual results under `scheme`.
///
/// Democracy uses the sample-weighted mean SCC and the SCC at the
/// sample-weighted mean preferences. The other schemes average the country
/// rows of [`country_table`] with [`country_scheme_weights`], for both the
/// mean and the reference SCC.
pub fn aggregate(
    results: &[SccResult],
    weights: &CountryWeights,
    scheme: AggregationScheme,
    welfare: WelfareOptions,
    mdp: &MarginalDamagePath,
    growth: &[f64],
) -> Result<AggregateReport> {
    if results.is_empty() {
        return Err(Error::Empty("no SCC results to aggregate".into()));
    }
    let countries = country_table(results, mdp, growth)?;
    aggregate_table(results, countries, weights, scheme, welfare, mdp, growth)
}

/// As [`aggregate`], reusing a precomputed country table.
pub fn aggregate_table(
    results: &[SccResult],
    countries: Vec<CountryRow>,
    weights: &CountryWeights,
    scheme: AggregationScheme,
    welfare: WelfareOptions,
    mdp: &MarginalDamagePath,
    growth: &[f64],
) -> Result<AggregateReport> {
    let (ref_scc, mean_scc) = if scheme == AggregationScheme::Democracy {
        let s = scc::premium_summary(results, mdp, growth)?;
        (s.ref_scc, s.mean_scc)
    } else {
        let w = country_scheme_weights(&countries, weights, scheme, welfare)?;
        (
            countries.iter().zip(&w).map(|(r, w)| w * r.ref_scc).sum(),
            countries.iter().zip(&w).map(|(r, w)| w * r.mean_scc).sum(),
        )
    };
    let values: Vec<f64> = results.iter().map(|r| r.scc).collect();
    let ws: Vec<f64> = results.iter().map(|r| r.weight).collect();
    let mean_percentile = stats::percentile_of(&values, &ws, mean_scc)
        .ok_or_else(|| Error::Empty("results carry no weight".into()))?;
    Ok(AggregateReport {
        scheme,
        ref_scc,
        mean_scc,
        premium: mean_scc - ref_scc,
        mean_percentile,
        countries,
    })
}

pub fn write_country_table(rows: &[CountryRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub width: f64,
    /// Values at or above this edge are counted as overflow rather than
    /// binned; `None` bins everything.
    pub upper: Option<f64>,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            width: 2.0,
            upper: Some(500.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    /// Share of total weight in the bin.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub total_weight: f64,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub skewness: f64,
    /// Midpoint of the bin carrying the most weight.
    pub mode: f64,
    pub percentile_of_mean: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
    /// Share of weight at or above `BinSpec::upper`.
    pub overflow_share: f64,
}

/// Weighted summary of the SCC distribution. Medians use the
/// midpoint-position convention of [`stats::weighted_quantile`].
pub fn distribution_stats(results: &[SccResult], bins: BinSpec) -> Result<DistributionStats> {
    let values: Vec<f64> = results.iter().map(|r| r.scc).collect();
    let weights: Vec<f64> = results.iter().map(|r| r.weight).collect();
    distribution_of(&values, &weights, bins)
}

pub fn distribution_of(values: &[f64], weights: &[f64], bins: BinSpec) -> Result<DistributionStats> {
    if !(bins.width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {}", bins.width)));
    }
    let empty = || Error::Empty("no weighted values".into());
    let mean = stats::weighted_mean(values, weights).ok_or_else(empty)?;
    let total_weight: f64 = weights.iter().sum();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (min / bins.width).floor() * bins.width;
    let top = match bins.upper {
        Some(u) if u > lo => u,
        _ => max + bins.width,
    };
    let nbins = (((top - lo) / bins.width).ceil() as usize).clamp(1, 1_000_000);
    let mut shares = vec![0.0; nbins];
    let mut overflow = 0.0;
    for (v, w) in values.iter().zip(weights) {
        let k = ((v - lo) / bins.width).floor();
        if bins.upper.is_some_and(|u| *v >= u) || k as usize >= nbins {
            overflow += w / total_weight;
        } else {
            shares[k as usize] += w / total_weight;
        }
    }
    let histogram: Vec<HistogramBin> = shares
        .iter()
        .enumerate()
        .map(|(k, &share)| HistogramBin {
            lower: lo + k as f64 * bins.width,
            upper: lo + (k + 1) as f64 * bins.width,
            share,
        })
        .collect();
    let densest = histogram
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.share.total_cmp(&b.1.share).then(b.0.cmp(&a.0)))
        .map(|(_, b)| b)
        .unwrap();
    Ok(DistributionStats {
        count: values.len(),
        total_weight,
        mean,
        median: stats::weighted_quantile(values, weights, 0.5).ok_or_else(empty)?,
        sd: stats::weighted_variance(values, weights).ok_or_else(empty)?.sqrt(),
        skewness: stats::weighted_skewness(values, weights).unwrap_or(0.0),
        mode: 0.5 * (densest.lower + densest.upper),
        percentile_of_mean: stats::percentile_of(values, weights, mean).ok_or_else(empty)?,
        min,
        max,
        histogram,
        overflow_share: overflow,
    })
}

pub fn write_histogram(d: &DistributionStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for b in &d.histogram {
        w.serialize(b)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SliceKey {
    Gender,
    /// Age bins of the given width, labelled by their lower edge.
    Age(u32),
}

impl SliceKey {
    fn key(&self, r: &SccResult) -> Option<String> {
        match self {
            SliceKey::Gender => Some(r.gender.to_string()),
            SliceKey::Age(width) => r.age.map(|a| {
                let w = (*width).max(1) as f64;
                format!("{}", ((a / w).floor() * w) as i64)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub group: String,
    pub respondents: usize,
    pub weight: f64,
    pub mean_scc: f64,
    /// Normal-approximation 95% interval, with the standard error from the
    /// weighted variance and the Kish effective sample size.
    pub ci_low: f64,
    pub ci_high: f64,
    pub rho_mean: f64,
    pub eta_mean: f64,
    /// Fewer respondents than the minimum group size.
    pub unreliable: bool,
}

/// Groups are sorted numerically for age bins and alphabetically otherwise.
/// Results without the key (e.g. missing age) are skipped.
pub fn slice_by(results: &[SccResult], key: SliceKey, min_size: usize) -> Vec<SliceSummary> {
    let mut groups: BTreeMap<String, Vec<&SccResult>> = BTreeMap::new();
    for r in results {
        if let Some(k) = key.key(r) {
            groups.entry(k).or_default().push(r);
        }
    }
    let mut out: Vec<SliceSummary> = groups
        .into_iter()
        .filter_map(|(group, members)| {
            let w: Vec<f64> = members.iter().map(|r| r.weight).collect();
            let scc: Vec<f64> = members.iter().map(|r| r.scc).collect();
            let mean = stats::weighted_mean(&scc, &w)?;
            let se = (stats::weighted_variance(&scc, &w)? / stats::effective_sample_size(&w)).sqrt();
            Some(SliceSummary {
                respondents: members.len(),
                weight: w.iter().sum(),
                mean_scc: mean,
                ci_low: mean - 1.96 * se,
                ci_high: mean + 1.96 * se,
                rho_mean: stats::weighted_mean(&members.iter().map(|r| r.rho).collect::<Vec<_>>(), &w)?,
                eta_mean: stats::weighted_mean(&members.iter().map(|r| r.eta).collect::<Vec<_>>(), &w)?,
                unreliable: members.len() < min_size,
                group,
            })
        })
        .collect();
    if matches!(key, SliceKey::Age(_)) {
        out.sort_by_key(|s| s.group.parse::<i64>().unwrap_or(i64::MAX));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
}

/// Pearson and Spearman correlation over paired observations.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("{} vs {} observations", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} paired observations, need at least 3",
            x.len()
        )));
    }
    let degenerate = || Error::InsufficientData("a series is constant".into());
    Ok(Correlation {
        n: x.len(),
        pearson: stats::pearson(x, y).ok_or_else(degenerate)?,
        spearman: stats::spearman(x, y).ok_or_else(degenerate)?,
    })
}

/// Country-level policy indicators; `None` marks a missing value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyTable {
    pub indicators: Vec<String>,
    pub rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl PolicyTable {
    /// Reads a CSV whose first column is `country` and whose remaining
    /// columns are numeric indicators. Blank and `NA` cells are missing.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let schema = |message: String| Error::Schema {
            path: path.to_path_buf(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("country") {
            return Err(schema("first column must be \"country\"".into()));
        }
        let indicators: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        if indicators.is_empty() {
            return Err(schema("no indicator columns".into()));
        }
        let mut rows = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let values = rec
                .iter()
                .skip(1)
                .map(|cell| match cell.to_ascii_lowercase().as_str() {
                    "" | "na" | "nan" | "." | "null" => Ok(None),
                    _ => cell
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| schema(format!("line {}: not a number: {cell:?}", i + 2))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.insert(rec[0].to_owned(), values);
        }
        Ok(Self { indicators, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorCorrelation {
    pub indicator: String,
    /// Overlapping countries with both values present.
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Correlates country SCCs with each policy indicator over pairwise-complete
/// observations. Indicators with fewer than three overlapping countries are
/// reported without coefficients; if no indicator reaches three, the whole
/// call fails.
pub fn correlate_policy(country_scc: &BTreeMap<String, f64>, policy: &PolicyTable) -> Result<Vec<IndicatorCorrelation>> {
    let out: Vec<IndicatorCorrelation> = policy
        .indicators
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (x, y): (Vec<f64>, Vec<f64>) = policy
                .rows
                .iter()
                .filter_map(|(c, vals)| Some((*country_scc.get(c)?, vals.get(j).copied().flatten()?)))
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .unzip();
            let c = correlate(&x, &y).ok();
            IndicatorCorrelation {
                indicator: name.clone(),
                n: x.len(),
                pearson: c.map(|c| c.pearson),
                spearman: c.map(|c| c.spearman),
            }
        })
        .collect();
    if out.iter().all(|c| c.n < 3) {
        return Err(Error::InsufficientData(
            "fewer than 3 countries overlap with every policy indicator".into(),
        ));
    }
    Ok(out)
}
