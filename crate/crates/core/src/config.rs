//! Engine configuration file. Relative paths resolve against the directory
//! holding the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{BinSpec, WelfareOptions};
use crate::error::{Error, Result};
use crate::iam::DamageKind;
use crate::preferences::{CalibrationSetup, CalibrationVariant};
use crate::sensitivity::{Axes, ELASTICITY_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Survey extract: `country,time_index,risk_index,gender,age,weight`.
    pub preferences: PathBuf,
    /// Scenario registry (TOML).
    pub scenarios: PathBuf,
    /// Country population, GDP and income table (CSV).
    pub weights: PathBuf,
    /// Carbon cycle, climate and damage coefficients (TOML).
    pub iam: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub scenario: String,
    pub damage: DamageKind,
    pub income_elasticity: f64,
    pub calibration: CalibrationVariant,
    pub start_year: i32,
    /// Last modelled year.
    pub horizon: i32,
    pub pulse_year: i32,
    /// Pulse size in GtC.
    pub pulse_gtc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationOptions {
    #[serde(default)]
    pub welfare_population_scaling: bool,
    pub min_group_size: usize,
    pub age_bin_width: u32,
    pub histogram_bin_width: f64,
    pub histogram_upper: Option<f64>,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        let bins = BinSpec::default();
        Self {
            welfare_population_scaling: false,
            min_group_size: 30,
            age_bin_width: 10,
            histogram_bin_width: bins.width,
            histogram_upper: bins.upper,
        }
    }
}

impl AggregationOptions {
    pub fn bins(&self) -> BinSpec {
        BinSpec {
            width: self.histogram_bin_width,
            upper: self.histogram_upper,
        }
    }

    pub fn welfare(&self) -> WelfareOptions {
        WelfareOptions {
            population_scaling: self.welfare_population_scaling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixOptions {
    /// Consumption growth used to turn `(rho, eta)` into a constant rate.
    pub growth_rate: f64,
    /// Added to both rates in the constant-versus-declining comparison.
    pub population_growth: f64,
    /// Histogram bin width for the rate fit, percent per year.
    pub rate_bin_width: f64,
    pub binning_multipliers: Vec<f64>,
    pub curve_horizon: usize,
    pub two_rate: [f64; 2],
}

impl Default for AppendixOptions {
    fn default() -> Self {
        Self {
            growth_rate: 0.017,
            population_growth: 0.0085,
            rate_bin_width: 0.25,
            binning_multipliers: vec![0.5, 1.0, 2.0],
            curve_horizon: 1000,
            two_rate: [0.01, 0.07],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: Paths,
    pub run: RunOptions,
    pub calibration: CalibrationSetup,
    #[serde(default)]
    pub aggregation: AggregationOptions,
    pub sensitivity: Option<Axes>,
    #[serde(default)]
    pub appendix: AppendixOptions,
}

impl EngineConfig {
    /// Parses the file and resolves relative paths; does not check that the
    /// referenced files exist (see [`EngineConfig::validate`]).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_options()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.paths.preferences,
            &mut self.paths.scenarios,
            &mut self.paths.weights,
            &mut self.paths.iam,
            &mut self.paths.output,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn check_options(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let r = &self.run;
        if r.start_year > r.pulse_year || r.pulse_year >= r.horizon {
            return bad(format!(
                "need start_year <= pulse_year < horizon, got {} / {} / {}",
                r.start_year, r.pulse_year, r.horizon
            ));
        }
        if r.horizon - r.start_year > 2000 {
            return bad(format!("horizon {} is more than 2000 years past the start", r.horizon));
        }
        if !(r.pulse_gtc > 0.0 && r.pulse_gtc <= 100.0) {
            return bad(format!("pulse_gtc must lie in (0, 100], got {}", r.pulse_gtc));
        }
        if !r.income_elasticity.is_finite() {
            return bad("income_elasticity must be finite".into());
        }
        let a = &self.aggregation;
        if !(a.histogram_bin_width > 0.0) {
            return bad("histogram_bin_width must be positive".into());
        }
        if a.age_bin_width == 0 {
            return bad("age_bin_width must be positive".into());
        }
        let x = &self.appendix;
        if !(x.rate_bin_width > 0.0) || x.binning_multipliers.iter().any(|m| !(*m > 0.0)) {
            return bad("rate bin width and multipliers must be positive".into());
        }
        if !(x.two_rate[0] > -1.0 && x.two_rate[1] > -1.0) {
            return bad("two_rate entries must exceed -1".into());
        }
        if let Some(ax) = &self.sensitivity {
            if ax.cells().is_empty() {
                return bad("sensitivity axes produce no cells".into());
            }
        }
        Ok(())
    }

    /// Checks that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let missing: Vec<String> = [
            ("preferences", &self.paths.preferences),
            ("scenarios", &self.paths.scenarios),
            ("weights", &self.paths.weights),
            ("iam", &self.paths.iam),
        ]
        .iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(name, p)| format!("{name} = {}", p.display()))
        .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("input files not found: {}", missing.join("; "))))
        }
    }

    /// Sensitivity axes from the file, or every scenario in `registry_ids`
    /// crossed with all damage kinds, the default elasticity grid and all
    /// calibration variants.
    pub fn axes(&self, registry_ids: impl IntoIterator<Item = String>) -> Axes {
        self.sensitivity.clone().unwrap_or_else(|| Axes {
            scenarios: registry_ids.into_iter().collect(),
            damages: DamageKind::ALL.to_vec(),
            elasticities: ELASTICITY_GRID.to_vec(),
            calibrations: CalibrationVariant::ALL.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [paths]
        preferences = "prefs.csv"
        scenarios = "scenarios/registry.toml"
        weights = "/abs/weights.csv"
        iam = "iam.toml"
        output = "out"

        [run]
        scenario = "ssp2"
        damage = "dice2023"
        income_elasticity = -0.36
        calibration = "base"
        start_year = 2020
        horizon = 2300
        pulse_year = 2020
        pulse_gtc = 1.0

        [calibration]
        time_orientation = "inverted"
        [calibration.anchors]
        rho_q5 = 0.0
        rho_q95 = 0.04
        eta_q5 = 0.3
        eta_q95 = 3.0
    "#;

    #[test]
    fn parses_with_defaults_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("config.toml");
        fs::write(&p, MINIMAL).unwrap();
        let cfg = EngineConfig::from_file(&p).unwrap();
        assert_eq!(cfg.paths.preferences, dir.path().join("prefs.csv"));
        assert_eq!(cfg.paths.weights, PathBuf::from("/abs/weights.csv"));
        assert_eq!(cfg.aggregation, AggregationOptions::default());
        assert_eq!(cfg.appendix.growth_rate, 0.017);
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("preferences")));
        let axes = cfg.axes(["a".to_owned(), "b".to_owned()]);
        assert_eq!(axes.cells().len(), 2 * 6 * 5 * 3);
    }

    #[test]
    fn rejects_bad_options() {
        let pulse_after_horizon = MINIMAL.replace("pulse_year = 2020", "pulse_year = 2400");
        assert!(matches!(EngineConfig::from_toml(&pulse_after_horizon), Err(Error::Config(_))));
        let unknown = MINIMAL.replace("[run]", "[run]\nfoo = 1");
        assert!(matches!(EngineConfig::from_toml(&unknown), Err(Error::Config(_))));
        let bad_damage = MINIMAL.replace("\"dice2023\"", "\"page\"");
        assert!(EngineConfig::from_toml(&bad_damage).is_err());
    }
}
