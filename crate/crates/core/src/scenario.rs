//! Socio-economic scenarios: annual population, per-capita income,
//! industrial CO2 emissions and exogenous (non-CO2) forcing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub years: Vec<i32>,
    /// persons
    pub population: Vec<f64>,
    /// 2010 USD per person-year
    pub income_pc: Vec<f64>,
    /// GtC per year
    pub emissions: Vec<f64>,
    /// W/m2, non-CO2
    pub exo_forcing: Vec<f64>,
}

const REQUIRED_COLUMNS: [&str; 4] = ["year", "population", "income_pc", "emissions"];

impl Scenario {
    /// Builds a scenario and checks its invariants.
    pub fn new(
        id: impl Into<String>,
        years: Vec<i32>,
        population: Vec<f64>,
        income_pc: Vec<f64>,
        emissions: Vec<f64>,
        exo_forcing: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = years.len();
        let exo_forcing = exo_forcing.unwrap_or_else(|| vec![0.0; n]);
        let s = Scenario {
            id: id.into(),
            years,
            population,
            income_pc,
            emissions,
            exo_forcing,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.years.len();
        if n == 0 {
            return Err(Error::Empty(format!("scenario {} has no years", self.id)));
        }
        for (name, len) in [
            ("population", self.population.len()),
            ("income_pc", self.income_pc.len()),
            ("emissions", self.emissions.len()),
            ("exo_forcing", self.exo_forcing.len()),
        ] {
            if len != n {
                return Err(Error::Alignment(format!(
                    "scenario {}: {name} has {len} entries, years has {n}",
                    self.id
                )));
            }
        }
        for w in self.years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::Ordering(format!(
                    "scenario {}: years must be annual and increasing ({} -> {})",
                    self.id, w[0], w[1]
                )));
            }
        }
        check_domain(&self.id, "population", &self.population, |v| v > 0.0)?;
        check_domain(&self.id, "income_pc", &self.income_pc, |v| v > 0.0)?;
        check_domain(&self.id, "emissions", &self.emissions, |v| v >= 0.0)?;
        check_domain(&self.id, "exo_forcing", &self.exo_forcing, |_| true)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn start_year(&self) -> i32 {
        self.years[0]
    }

    pub fn end_year(&self) -> i32 {
        *self.years.last().expect("validated scenario is nonempty")
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        if year < self.start_year() || year > self.end_year() {
            None
        } else {
            Some((year - self.start_year()) as usize)
        }
    }

    pub fn gross_output(&self) -> Vec<f64> {
        self.population
            .iter()
            .zip(&self.income_pc)
            .map(|(p, y)| p * y)
            .collect()
    }

    pub fn population_growth(&self) -> Vec<f64> {
        growth_rates(&self.population)
    }

    /// Restricts the scenario to `[start, end]`. Years past the data horizon
    /// are filled by holding the last population and income growth rates and
    /// the last emissions and forcing levels constant.
    pub fn window(&self, start: i32, end: i32) -> Result<Scenario> {
        if start < self.start_year() || start > self.end_year() || end < start {
            return Err(Error::Range(format!(
                "scenario {} covers {}..={}, requested {start}..={end}",
                self.id,
                self.start_year(),
                self.end_year()
            )));
        }
        let lo = (start - self.start_year()) as usize;
        let hi = (end.min(self.end_year()) - self.start_year()) as usize;
        let mut out = Scenario {
            id: self.id.clone(),
            years: self.years[lo..=hi].to_vec(),
            population: self.population[lo..=hi].to_vec(),
            income_pc: self.income_pc[lo..=hi].to_vec(),
            emissions: self.emissions[lo..=hi].to_vec(),
            exo_forcing: self.exo_forcing[lo..=hi].to_vec(),
        };
        if end > self.end_year() {
            let pop_g = *self.population_growth().last().unwrap();
            let inc_g = *growth_path(self).last().unwrap();
            let e = *self.emissions.last().unwrap();
            let f = *self.exo_forcing.last().unwrap();
            for year in self.end_year() + 1..=end {
                let p = *out.population.last().unwrap() * (1.0 + pop_g);
                let y = *out.income_pc.last().unwrap() * (1.0 + inc_g);
                out.years.push(year);
                out.population.push(p);
                out.income_pc.push(y);
                out.emissions.push(e);
                out.exo_forcing.push(f);
            }
        }
        out.validate()?;
        Ok(out)
    }
}

fn check_domain(id: &str, name: &str, values: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
    match values.iter().position(|&v| !v.is_finite() || !ok(v)) {
        Some(i) => Err(Error::Domain(format!(
            "scenario {id}: {name}[{i}] = {} is out of domain",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Per-step growth rates `x(t+1)/x(t) - 1`; the last entry repeats the
/// previous rate.
pub fn growth_rates(series: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = series.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    match g.last().copied() {
        Some(last) => g.push(last),
        None if !series.is_empty() => g.push(0.0),
        None => {}
    }
    g
}

/// Consumption growth path of a scenario.
pub fn growth_path(s: &Scenario) -> Vec<f64> {
    growth_rates(&s.income_pc)
}

/// Loads a scenario CSV (`year,population,income_pc,emissions[,exo_forcing]`).
/// Rows on a coarser than annual grid are interpolated linearly.
pub fn load_scenario(path: impl AsRef<Path>, id: &str) -> Result<Scenario> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing: Vec<&str> = REQUIRED_COLUMNS
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
    let idx: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| col(c).unwrap()).collect();
    let exo_idx = col("exo_forcing");

    let mut years = Vec::new();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Schema {
                path: path.to_path_buf(),
                message: format!("row {}: cannot parse {name} = {raw:?}", row + 2),
            })
        };
        let year = field(idx[0], "year")?;
        if year.fract() != 0.0 {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("row {}: non-integer year {year}", row + 2),
            });
        }
        years.push(year as i32);
        cols[0].push(field(idx[1], "population")?);
        cols[1].push(field(idx[2], "income_pc")?);
        cols[2].push(field(idx[3], "emissions")?);
        cols[3].push(match exo_idx {
            Some(i) if !record.get(i).unwrap_or("").is_empty() => field(i, "exo_forcing")?,
            _ => 0.0,
        });
    }
    if years.is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }
    if let Some(w) = years.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Ordering(format!(
            "{}: years not strictly increasing ({} then {})",
            path.display(),
            w[0],
            w[1]
        )));
    }
    for (name, values) in [("population", &cols[0]), ("income_pc", &cols[1])] {
        if let Some(v) = values.iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain(format!(
                "{}: {name} must be positive, found {v}",
                path.display()
            )));
        }
    }
    if let Some(v) = cols[2].iter().find(|&&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "{}: emissions must be nonnegative, found {v}",
            path.display()
        )));
    }

    let [population, income_pc, emissions, exo] = cols;
    let annual_years: Vec<i32> = (years[0]..=*years.last().unwrap()).collect();
    Scenario::new(
        id,
        annual_years.clone(),
        annualize(&years, &population),
        annualize(&years, &income_pc),
        annualize(&years, &emissions),
        Some(annualize(&years, &exo)),
    )
}

/// Linear interpolation of `(years, values)` onto every integer year in range.
fn annualize(years: &[i32], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity((years[years.len() - 1] - years[0] + 1) as usize);
    for w in 0..years.len() - 1 {
        let (y0, y1) = (years[w], years[w + 1]);
        let (v0, v1) = (values[w], values[w + 1]);
        for y in y0..y1 {
            let frac = (y - y0) as f64 / (y1 - y0) as f64;
            out.push(if frac == 0.0 { v0 } else { v0 + frac * (v1 - v0) });
        }
    }
    out.push(values[values.len() - 1]);
    out
}

/// Writes a scenario in the loader's CSV format.
pub fn write_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["year", "population", "income_pc", "emissions", "exo_forcing"])?;
    for i in 0..s.len() {
        w.write_record([
            s.years[i].to_string(),
            s.population[i].to_string(),
            s.income_pc[i].to_string(),
            s.emissions[i].to_string(),
            s.exo_forcing[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub family: String,
    #[serde(default)]
    pub description: String,
}

/// Scenario files keyed by label (`ssp1`..`ssp5`, `sres-a1`, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRegistry {
    #[serde(skip)]
    pub base_dir: PathBuf,
    pub scenarios: BTreeMap<String, ScenarioEntry>,
}

impl ScenarioRegistry {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reg: ScenarioRegistry = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        reg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(reg)
    }

    pub fn path_of(&self, id: &str) -> Result<PathBuf> {
        let entry = self
            .scenarios
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown scenario {id:?}")))?;
        Ok(self.base_dir.join(&entry.path))
    }

    pub fn load(&self, id: &str) -> Result<Scenario> {
        load_scenario(self.path_of(id)?, id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn annual_file_length() {
        let mut text = String::from("year,population,income_pc,emissions\n");
        for y in 2020..=2300 {
            text.push_str(&format!("{y},7.8e9,11000,10\n"));
        }
        let f = write_tmp(&text);
        let s = load_scenario(f.path(), "ssp2").unwrap();
        assert_eq!(s.len(), 281);
        assert_eq!(s.exo_forcing, vec![0.0; 281]);
    }

    #[test]
    fn decadal_rows_are_interpolated() {
        let f = write_tmp(
            "year,population,income_pc,emissions,exo_forcing\n\
             2020,100,10000,10,0.2\n2030,110,12000,12,0.4\n2040,120,15000,8,0.5\n",
        );
        let s = load_scenario(f.path(), "x").unwrap();
        assert_eq!(s.len(), 21);
        let i = s.index_of(2025).unwrap();
        assert_eq!(s.income_pc[i], 11000.0);
        assert_eq!(s.income_pc[s.index_of(2030).unwrap()], 12000.0);
        assert!((s.exo_forcing[i] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write_tmp("year,population,emissions\n2020,1,1\n");
        match load_scenario(f.path(), "x") {
            Err(Error::Schema { message, .. }) => assert!(message.contains("income_pc")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_years_rejected() {
        let f = write_tmp("year,population,income_pc,emissions\n2030,1,1,1\n2020,1,1,1\n");
        assert!(matches!(load_scenario(f.path(), "x"), Err(Error::Ordering(_))));
    }

    #[test]
    fn negative_income_rejected() {
        let f = write_tmp("year,population,income_pc,emissions\n2020,1,-1,1\n2021,1,1,1\n");
        assert!(matches!(load_scenario(f.path(), "x"), Err(Error::Domain(_))));
    }

    #[test]
    fn growth_of_constant_and_doubling_income() {
        let years: Vec<i32> = (2020..2030).collect();
        let ones = vec![1.0; 10];
        let s = Scenario::new("c", years.clone(), ones.clone(), ones.clone(), ones.clone(), None)
            .unwrap();
        assert!(growth_path(&s).iter().all(|&g| g == 0.0));

        let doubling: Vec<f64> = (0..10).map(|i| 2f64.powi(i)).collect();
        let s = Scenario::new("d", years, ones.clone(), doubling, ones, None).unwrap();
        assert!(growth_path(&s).iter().all(|&g| g == 1.0));
    }

    #[test]
    fn window_extends_with_last_growth_rate() {
        let years: Vec<i32> = (2020..=2025).collect();
        let inc: Vec<f64> = (0..6).map(|i| 100.0 * 1.02f64.powi(i)).collect();
        let s = Scenario::new("w", years, vec![5.0; 6], inc, vec![3.0; 6], None).unwrap();
        let w = s.window(2021, 2030).unwrap();
        assert_eq!(w.years.first(), Some(&2021));
        assert_eq!(w.years.last(), Some(&2030));
        for g in growth_path(&w) {
            assert!((g - 0.02).abs() < 1e-12);
        }
        assert_eq!(w.emissions[9], 3.0);
        assert!(s.window(2019, 2030).is_err());
    }

    #[test]
    fn registry_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("a.csv"),
            "year,population,income_pc,emissions\n2020,1,1,1\n2021,1,1,1\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("registry.toml"),
            "[scenarios.ssp9]\npath = \"a.csv\"\nfamily = \"ssp\"\n",
        )
        .unwrap();
        let reg = ScenarioRegistry::from_file(dir.path().join("registry.toml")).unwrap();
        assert_eq!(reg.load("ssp9").unwrap().len(), 2);
        assert!(matches!(reg.load("nope"), Err(Error::Config(_))));
    }
}
