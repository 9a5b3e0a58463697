//! Deterministic synthetic survey populations with the shape of the real
//! preference extract: standardized time and risk indices with country
//! effects, gender and age gradients, and sampling weights that make each
//! country's sample represent its population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preferences::{Gender, PreferenceRecord, RISK_INDEX_RANGE, TIME_INDEX_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub respondents: usize,
    /// `(country code, population)`; respondents are split evenly.
    pub countries: Vec<(String, f64)>,
    /// Standard deviation of country means of the indices.
    pub country_sd: f64,
}

impl SyntheticSpec {
    pub fn new(seed: u64, respondents: usize, countries: Vec<(String, f64)>) -> Self {
        Self {
            seed,
            respondents,
            countries,
            country_sd: 0.35,
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<Vec<PreferenceRecord>> {
    if spec.countries.is_empty() || spec.respondents < spec.countries.len() {
        return Err(Error::Config(format!(
            "need at least one respondent per country ({} respondents, {} countries)",
            spec.respondents,
            spec.countries.len()
        )));
    }
    if let Some((c, p)) = spec.countries.iter().find(|(_, p)| !(*p > 0.0)) {
        return Err(Error::Domain(format!("population of {c} must be positive, got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let country_effect = Normal::new(0.0, spec.country_sd.max(0.0)).unwrap();
    let weight_noise = LogNormal::new(0.0, 0.3).unwrap();

    let k = spec.countries.len();
    let base = spec.respondents / k;
    let extra = spec.respondents % k;
    let mut out = Vec::with_capacity(spec.respondents);
    for (i, (country, population)) in spec.countries.iter().enumerate() {
        let n = base + usize::from(i < extra);
        let time_mean: f64 = country_effect.sample(&mut rng);
        let risk_mean: f64 = country_effect.sample(&mut rng);
        let per_head = population / n as f64;
        for _ in 0..n {
            let female = rng.random_bool(0.5);
            let gender = if rng.random_bool(0.005) {
                Gender::Unknown
            } else if female {
                Gender::Female
            } else {
                Gender::Male
            };
            let age: f64 = (15.0 + 70.0 * rng.random::<f64>().powf(1.3)).round();
            let age_dev = (age - 42.0) / 17.0;
            // right-skewed patience, as produced by a staircase design
            let z: f64 = std_normal.sample(&mut rng);
            let skewed = 0.9 * z + 0.18 * (z * z - 1.0);
            let time = time_mean + skewed - 0.08 * age_dev - if female { 0.04 } else { 0.0 };
            let eps: f64 = std_normal.sample(&mut rng);
            let risk = risk_mean + 0.9 * eps
                - 0.22 * age_dev
                - if female { 0.17 } else { 0.0 };
            let missing_age = rng.random_bool(0.003);
            out.push(PreferenceRecord {
                row: out.len(),
                country: country.clone(),
                time_index: time.clamp(TIME_INDEX_RANGE.0, TIME_INDEX_RANGE.1),
                risk_index: risk.clamp(RISK_INDEX_RANGE.0, RISK_INDEX_RANGE.1),
                gender,
                age: (!missing_age).then_some(age),
                weight: per_head * weight_noise.sample(&mut rng),
                rho: None,
                eta: None,
            });
        }
    }
    let mean_w = out.iter().map(|r| r.weight).sum::<f64>() / out.len() as f64;
    for r in &mut out {
        r.weight /= mean_w;
    }
    Ok(out)
}

/// Writes records in the survey input format.
pub fn write_preferences(records: &[PreferenceRecord], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["country", "time_index", "risk_index", "gender", "age", "weight"])?;
    for r in records {
        w.write_record([
            r.country.clone(),
            r.time_index.to_string(),
            r.risk_index.to_string(),
            r.gender.to_string(),
            r.age.map(|a| a.to_string()).unwrap_or_default(),
            r.weight.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
