//! End-to-end commands: load inputs, run the engine, write a run directory.
//!
//! A run directory is named after the command and a digest of its
//! parameters and input file contents, so rerunning the same command on the
//! same inputs rewrites the same files with the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::aggregation::{
    self, AggregateReport, AggregationScheme, CountryWeights, DistributionStats, PolicyTable, SliceKey, SliceSummary,
};
use crate::appendix;
use crate::config::EngineConfig;
use crate::discounting::{fit_zig, fit_zig_binning_sensitivity, zig_rate, RateUnits, ZeroInflatedGammaFit, ZigFitOptions};
use crate::error::{Error, Result};
use crate::iam::{DamageKind, IamConfig, TONNES_PER_GT};
use crate::preferences::{
    apply_calibration, fit_calibration, load_preferences, write_calibrated, CalibrationMap, CalibrationVariant,
    ClampReport, PreferenceRecord,
};
use crate::scc::{self, PremiumSummary, SccResult};
use crate::scenario::{Scenario, ScenarioRegistry};
use crate::sensitivity::{self, Axes, DamageContext, MatrixOptions, ModelSetup, Populations, RunCell};

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Parsed inputs shared by all commands.
pub struct Inputs {
    pub config: EngineConfig,
    pub iam: IamConfig,
    pub registry: ScenarioRegistry,
    pub weights: CountryWeights,
    pub records: Vec<PreferenceRecord>,
    pub dropped_missing: usize,
    pub malformed_rows: usize,
}

impl Inputs {
    pub fn load(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let iam = IamConfig::from_file(&config.paths.iam)?;
        let registry = ScenarioRegistry::from_file(&config.paths.scenarios)?;
        let weights = CountryWeights::from_csv(&config.paths.weights)?;
        let report = load_preferences(&config.paths.preferences)?;
        info!(
            "{} respondents loaded ({} dropped for missing indices, {} malformed rows)",
            report.records.len(),
            report.dropped_missing,
            report.row_errors.len()
        );
        if report.records.is_empty() {
            return Err(Error::Empty("no usable survey records".into()));
        }
        Ok(Self {
            config,
            iam,
            registry,
            weights,
            records: report.records,
            dropped_missing: report.dropped_missing,
            malformed_rows: report.row_errors.len(),
        })
    }

    /// Scenario restricted to the configured model years.
    pub fn scenario(&self, id: &str) -> Result<Scenario> {
        self.registry
            .load(id)?
            .window(self.config.run.start_year, self.config.run.horizon)
    }

    pub fn model_setup<'a>(&'a self, loader: &'a sensitivity::ScenarioLoader<'a>) -> ModelSetup<'a> {
        ModelSetup {
            iam: &self.iam,
            scenarios: loader,
            pulse_size: self.config.run.pulse_gtc * TONNES_PER_GT,
            pulse_year: self.config.run.pulse_year,
        }
    }

    /// Calibrated copy of the survey records.
    pub fn calibrate(&self, variant: CalibrationVariant) -> Result<(CalibrationMap, ClampReport, Vec<PreferenceRecord>)> {
        let mut setup = self.config.calibration.clone();
        setup.population = self
            .weights
            .by_country
            .iter()
            .map(|(c, w)| (c.clone(), w.population))
            .collect();
        let map = fit_calibration(&self.records, &setup, variant)?;
        let mut records = self.records.clone();
        let clamp = apply_calibration(&map, &mut records);
        Ok((map, clamp, records))
    }

    fn input_digests(&self) -> Result<BTreeMap<String, FileDigest>> {
        let mut files = vec![
            ("preferences".to_owned(), self.config.paths.preferences.clone()),
            ("iam".to_owned(), self.config.paths.iam.clone()),
            ("weights".to_owned(), self.config.paths.weights.clone()),
            ("scenario_registry".to_owned(), self.config.paths.scenarios.clone()),
        ];
        for id in self.registry.scenarios.keys() {
            files.push((format!("scenario:{id}"), self.registry.path_of(id)?));
        }
        files
            .into_iter()
            .map(|(name, path)| {
                let sha256 = sha256_file(&path)?;
                Ok((name, FileDigest { path: path.display().to_string(), sha256 }))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub run_id: String,
    pub engine_version: String,
    /// Digest of the resolved configuration and command parameters.
    pub config_sha256: String,
    pub parameters: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// An open run directory collecting output files.
pub struct RunDir {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    pub fn create(inputs: &Inputs, command: &str, parameters: serde_json::Value) -> Result<Self> {
        let config_json = serde_json::to_string(&json!({
            "config": inputs.config,
            "parameters": parameters,
        }))?;
        let config_sha256 = hex::encode(Sha256::digest(config_json.as_bytes()));
        let digests = inputs.input_digests()?;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(config_sha256.as_bytes());
        for (name, d) in &digests {
            h.update(name.as_bytes());
            h.update(d.sha256.as_bytes());
        }
        let run_id = format!("{command}-{}", &hex::encode(h.finalize())[..12]);
        let dir = inputs.config.paths.output.join(&run_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        info!("writing to {}", dir.display());
        Ok(Self {
            dir,
            manifest: Manifest {
                command: command.to_owned(),
                run_id,
                engine_version: env!("CARGO_PKG_VERSION").to_owned(),
                config_sha256,
                parameters,
                inputs: digests,
                outputs: Vec::new(),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Records output digests and writes `manifest.json`.
    pub fn finish(mut self, outputs: &[&str]) -> Result<PathBuf> {
        let mut names: Vec<&str> = outputs.to_vec();
        names.sort_unstable();
        for name in names {
            let p = self.path(name);
            self.manifest.outputs.push(FileDigest {
                path: name.to_owned(),
                sha256: sha256_file(&p)?,
            });
        }
        self.write_json("manifest.json", &self.manifest)?;
        Ok(self.dir)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SccOverrides {
    pub scenario: Option<String>,
    pub calibration: Option<CalibrationVariant>,
    pub damage: Option<DamageKind>,
    pub income_elasticity: Option<f64>,
}

impl SccOverrides {
    pub fn apply(&self, cfg: &mut EngineConfig) {
        if let Some(s) = &self.scenario {
            cfg.run.scenario = s.clone();
        }
        if let Some(c) = self.calibration {
            cfg.run.calibration = c;
        }
        if let Some(d) = self.damage {
            cfg.run.damage = d;
        }
        if let Some(e) = self.income_elasticity {
            cfg.run.income_elasticity = e;
        }
    }
}

/// In-memory result of a single SCC run.
pub struct SccRun {
    pub calibration: CalibrationMap,
    pub clamp: ClampReport,
    pub records: Vec<PreferenceRecord>,
    pub context: DamageContext,
    pub results: Vec<SccResult>,
    pub failed: Vec<(usize, String)>,
    pub premium: PremiumSummary,
    pub aggregates: Vec<AggregateReport>,
    pub distribution: DistributionStats,
    pub gender: Vec<SliceSummary>,
    pub age: Vec<SliceSummary>,
}

impl SccRun {
    pub fn country_means(&self) -> BTreeMap<String, f64> {
        self.aggregates
            .first()
            .map(|r| r.countries.iter().map(|c| (c.country.clone(), c.mean_scc)).collect())
            .unwrap_or_default()
    }
}

/// Calibrates, computes every respondent's SCC for the configured run, and
/// aggregates under all schemes.
pub fn run_scc(inputs: &Inputs) -> Result<SccRun> {
    let cfg = &inputs.config;
    let (calibration, clamp, records) = inputs.calibrate(cfg.run.calibration)?;
    let loader = |id: &str| inputs.scenario(id);
    let setup = inputs.model_setup(&loader);
    let context = setup.damage_context(&cfg.run.scenario, cfg.run.damage, cfg.run.income_elasticity)?;

    let (results, failed) = scc::partition_results(scc::batch_scc(&context.mdp, &records, &context.growth));
    if !failed.is_empty() {
        warn!("{} respondents failed; first: {}", failed.len(), failed[0].1);
    }
    let failed: Vec<(usize, String)> = failed.into_iter().map(|(i, e)| (i, e.to_string())).collect();
    let premium = scc::premium_summary(&results, &context.mdp, &context.growth)?;

    let table = aggregation::country_table(&results, &context.mdp, &context.growth)?;
    let aggregates = AggregationScheme::ALL
        .iter()
        .map(|&scheme| {
            aggregation::aggregate_table(
                &results,
                table.clone(),
                &inputs.weights,
                scheme,
                cfg.aggregation.welfare(),
                &context.mdp,
                &context.growth,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let distribution = aggregation::distribution_stats(&results, cfg.aggregation.bins())?;
    let min = cfg.aggregation.min_group_size;
    Ok(SccRun {
        gender: aggregation::slice_by(&results, SliceKey::Gender, min),
        age: aggregation::slice_by(&results, SliceKey::Age(cfg.aggregation.age_bin_width), min),
        calibration,
        clamp,
        records,
        context,
        results,
        failed,
        premium,
        aggregates,
        distribution,
    })
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Runs [`run_scc`] and writes its outputs; returns the run directory.
pub fn cmd_scc(mut config: EngineConfig, overrides: &SccOverrides) -> Result<PathBuf> {
    overrides.apply(&mut config);
    let inputs = Inputs::load(config)?;
    let run = run_scc(&inputs)?;
    let out = RunDir::create(&inputs, "scc", serde_json::to_value(&inputs.config.run)?)?;

    write_calibrated(&run.records, out.path("calibrated.csv"))?;
    scc::write_results(&run.results, out.path("results.csv"))?;
    let mdp = &run.context.mdp;
    let mdp_rows: Vec<_> = mdp
        .years
        .iter()
        .zip(&mdp.delta_damage)
        .zip(&run.context.growth)
        .map(|((&year, &delta_damage), &growth)| MdpRow {
            year,
            delta_damage,
            growth,
        })
        .collect();
    write_csv(&mdp_rows, &out.path("marginal_damage.csv"))?;
    aggregation::write_country_table(&run.aggregates[0].countries, out.path("countries.csv"))?;
    aggregation::write_histogram(&run.distribution, out.path("histogram.csv"))?;
    write_csv(&run.gender, &out.path("slices_gender.csv"))?;
    write_csv(&run.age, &out.path("slices_age.csv"))?;

    let mut distribution = run.distribution.clone();
    distribution.histogram.clear();
    let schemes: Vec<_> = run
        .aggregates
        .iter()
        .map(|r| {
            json!({
                "scheme": r.scheme,
                "ref_scc": r.ref_scc,
                "mean_scc": r.mean_scc,
                "premium": r.premium,
                "mean_percentile": r.mean_percentile,
            })
        })
        .collect();
    out.write_json(
        "report.json",
        &json!({
            "run": inputs.config.run,
            "respondents": inputs.records.len(),
            "dropped_missing": inputs.dropped_missing,
            "malformed_rows": inputs.malformed_rows,
            "failed": run.failed,
            "calibration": run.calibration,
            "clamp": run.clamp,
            "premium": run.premium,
            "aggregates": schemes,
            "distribution": distribution,
        }),
    )?;
    out.finish(&[
        "calibrated.csv",
        "results.csv",
        "marginal_damage.csv",
        "countries.csv",
        "histogram.csv",
        "slices_gender.csv",
        "slices_age.csv",
        "report.json",
    ])
}

#[derive(Debug, Serialize)]
struct MdpRow {
    year: i32,
    delta_damage: f64,
    growth: f64,
}

/// Calibrated populations for every variant on the axes.
pub fn prepare_populations(inputs: &Inputs, variants: &[CalibrationVariant]) -> Populations {
    let mut out = Populations::new();
    for &v in variants {
        let entry = inputs.calibrate(v).map(|(_, _, r)| r).map_err(|e| {
            warn!("calibration {v} failed: {e}");
            e.to_string()
        });
        out.insert(v, entry);
    }
    out
}

pub struct SensitivityOptions {
    pub axes: Option<Axes>,
    pub use_cache: bool,
    /// Discard an existing checkpoint instead of resuming from it.
    pub fresh: bool,
}

pub fn run_sensitivity(inputs: &Inputs, axes: &Axes, opts: &MatrixOptions) -> Result<Vec<RunCell>> {
    let populations = prepare_populations(inputs, &axes.calibrations);
    let loader = |id: &str| inputs.scenario(id);
    let setup = inputs.model_setup(&loader);
    sensitivity::run_matrix(axes, &setup, &populations, opts)
}

pub fn cmd_sensitivity(config: EngineConfig, opts: &SensitivityOptions) -> Result<PathBuf> {
    let inputs = Inputs::load(config)?;
    let axes = opts
        .axes
        .clone()
        .unwrap_or_else(|| inputs.config.axes(inputs.registry.scenarios.keys().cloned()));
    let out = RunDir::create(&inputs, "sensitivity", json!({ "axes": axes }))?;
    let checkpoint = out.path("cells.jsonl");
    if opts.fresh && checkpoint.exists() {
        fs::remove_file(&checkpoint).map_err(|e| Error::io(&checkpoint, e))?;
    }
    info!("{} cells", axes.cells().len());
    let cells = run_sensitivity(
        &inputs,
        &axes,
        &MatrixOptions {
            use_cache: opts.use_cache,
            checkpoint: Some(checkpoint),
        },
    )?;
    let failed = cells.iter().filter(|c| !c.is_ok()).count();
    if failed > 0 {
        warn!("{failed} of {} cells failed", cells.len());
    }
    sensitivity::write_matrix_csv(&cells, out.path("matrix.csv"))?;
    out.write_json("matrix.json", &cells)?;
    out.finish(&["matrix.csv", "matrix.json"])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppendixOverrides {
    pub growth_rate: Option<f64>,
    pub population_growth: Option<f64>,
    /// Evaluate the rate comparison at these `(alpha, beta, delta)`, in
    /// percent units, instead of the fitted values.
    pub zig_parameters: Option<(f64, f64, f64)>,
}

pub struct AppendixRun {
    pub two_rate: Vec<appendix::TwoRatePoint>,
    /// Respondent rates in percent per year, with sample weights.
    pub rates: Vec<f64>,
    pub weights: Vec<f64>,
    pub fit: ZeroInflatedGammaFit,
    pub binning: Vec<ZeroInflatedGammaFit>,
    pub curves: Vec<appendix::RateCurvePoint>,
    pub comparison_fit: ZeroInflatedGammaFit,
    pub comparison: appendix::RateComparison,
}

pub fn run_appendix(inputs: &Inputs, overrides: &AppendixOverrides) -> Result<AppendixRun> {
    let cfg = &inputs.config;
    let a = &cfg.appendix;
    let g = overrides.growth_rate.unwrap_or(a.growth_rate);
    let n = overrides.population_growth.unwrap_or(a.population_growth);

    let two_rate = appendix::two_rate_curve(a.two_rate[0], a.two_rate[1], a.curve_horizon)?;
    let (_, _, records) = inputs.calibrate(cfg.run.calibration)?;
    let fractions = appendix::respondent_rates(records.iter().map(|r| (r.rho.unwrap(), r.eta.unwrap())), g);
    let weights: Vec<f64> = records.iter().map(|r| r.weight).collect();
    let rates: Vec<f64> = fractions.iter().map(|r| r * 100.0).collect();
    let opts = ZigFitOptions {
        bin_width: a.rate_bin_width,
        units: RateUnits::Percent,
        ..ZigFitOptions::default()
    };
    let fit = fit_zig(&rates, &weights, opts)?;
    let binning = fit_zig_binning_sensitivity(&rates, &weights, opts, &a.binning_multipliers)?;
    let curves = appendix::rate_curves(&fractions, &weights, &fit, a.curve_horizon)?;

    let comparison_fit = match overrides.zig_parameters {
        Some((alpha, beta, delta)) => ZeroInflatedGammaFit::from_parameters(alpha, beta, delta, RateUnits::Percent),
        None => fit.clone(),
    };
    let loader = |id: &str| inputs.scenario(id);
    let setup = inputs.model_setup(&loader);
    let ctx = setup.damage_context(&cfg.run.scenario, cfg.run.damage, cfg.run.income_elasticity)?;
    let comparison = appendix::constant_vs_declining(&ctx.mdp, &comparison_fit, n)?;
    Ok(AppendixRun {
        two_rate,
        rates,
        weights,
        fit,
        binning,
        curves,
        comparison_fit,
        comparison,
    })
}

#[derive(Debug, Serialize)]
struct RateBin {
    lower: f64,
    upper: f64,
    /// Weighted share of respondents divided by bin width.
    density: f64,
    /// Fitted density averaged over the bin.
    fitted: f64,
}

fn rate_histogram(run: &AppendixRun) -> Vec<RateBin> {
    let w = run.fit.bin_width;
    let total: f64 = run.weights.iter().sum();
    let max = run.rates.iter().copied().fold(0.0, f64::max);
    let nbins = ((max / w).floor() as usize + 1).min(100_000);
    let mut mass = vec![0.0; nbins];
    for (r, wt) in run.rates.iter().zip(&run.weights) {
        if *r > 0.0 {
            mass[((r / w).floor() as usize).min(nbins - 1)] += wt / total;
        }
    }
    mass.iter()
        .enumerate()
        .map(|(k, m)| {
            let (lo, hi) = (k as f64 * w, (k + 1) as f64 * w);
            let steps = 16;
            let fitted = (0..steps)
                .map(|j| run.fit.density(lo + (j as f64 + 0.5) * w / steps as f64))
                .sum::<f64>()
                / steps as f64;
            RateBin {
                lower: lo,
                upper: hi,
                density: m / w,
                fitted,
            }
        })
        .collect()
}

pub fn cmd_appendix(config: EngineConfig, overrides: &AppendixOverrides) -> Result<PathBuf> {
    let inputs = Inputs::load(config)?;
    let run = run_appendix(&inputs, overrides)?;
    let out = RunDir::create(
        &inputs,
        "appendix",
        json!({ "appendix": inputs.config.appendix, "run": inputs.config.run, "overrides": overrides }),
    )?;
    write_csv(&run.two_rate, &out.path("two_rate_curve.csv"))?;
    write_csv(&rate_histogram(&run), &out.path("rate_histogram.csv"))?;
    write_csv(&run.curves, &out.path("rate_curves.csv"))?;
    out.write_json(
        "zig_fit.json",
        &json!({
            "fit": run.fit,
            "binning_sensitivity": run.binning,
            "rate_at_0": zig_rate(&run.fit, 0.0) / 100.0,
            "rate_at_100": zig_rate(&run.fit, 100.0) / 100.0,
        }),
    )?;
    out.write_json(
        "rate_comparison.json",
        &json!({ "parameters": run.comparison_fit, "comparison": run.comparison }),
    )?;
    out.finish(&[
        "two_rate_curve.csv",
        "rate_histogram.csv",
        "rate_curves.csv",
        "zig_fit.json",
        "rate_comparison.json",
    ])
}

/// Correlates country mean SCCs of the configured run with policy indicators.
pub fn cmd_validate(config: EngineConfig, policy_csv: &Path) -> Result<PathBuf> {
    let inputs = Inputs::load(config)?;
    let policy = PolicyTable::from_csv(policy_csv)?;
    let run = run_scc(&inputs)?;
    let correlations = aggregation::correlate_policy(&run.country_means(), &policy)?;
    let policy_sha256 = sha256_file(policy_csv)?;
    let out = RunDir::create(
        &inputs,
        "validate",
        json!({ "run": inputs.config.run, "policy_sha256": policy_sha256 }),
    )?;
    write_csv(&correlations, &out.path("correlations.csv"))?;
    out.write_json("correlations.json", &correlations)?;
    out.finish(&["correlations.csv", "correlations.json"])
}
