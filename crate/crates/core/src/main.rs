use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use scc_core::aggregation::CountryWeights;
use scc_core::config::EngineConfig;
use scc_core::iam::DamageKind;
use scc_core::pipeline::{self, AppendixOverrides, SccOverrides, SensitivityOptions};
use scc_core::preferences::CalibrationVariant;
use scc_core::sensitivity::Axes;
use scc_core::synthetic::{self, SyntheticSpec};
use scc_core::{Error, ErrorClass, Result};

/// Social cost of carbon for heterogeneous time and risk preferences.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "data/config.toml")]
    config: PathBuf,
    /// Use this survey file instead of the configured one.
    #[arg(long)]
    preferences: Option<PathBuf>,
    /// Write run directories here instead of the configured location.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<EngineConfig> {
        let mut cfg = EngineConfig::from_file(&self.config)?;
        if let Some(p) = &self.preferences {
            cfg.paths.preferences = p.clone();
        }
        if let Some(o) = &self.output {
            cfg.paths.output = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-respondent SCC, premium, aggregates, histogram and slices.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        calibration: Option<CalibrationVariant>,
        #[arg(long)]
        damage: Option<DamageKind>,
        #[arg(long, allow_hyphen_values = true)]
        elasticity: Option<f64>,
    },
    /// Run matrix over scenarios, damage kinds, elasticities and calibrations.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        damages: Option<Vec<DamageKind>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        elasticities: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        calibrations: Option<Vec<CalibrationVariant>>,
        /// Recompute the marginal damage path for every cell.
        #[arg(long)]
        no_cache: bool,
        /// Ignore cells finished by an earlier run.
        #[arg(long)]
        fresh: bool,
    },
    /// Declining-rate analytics: certainty-equivalent curves, gamma fit,
    /// constant versus declining rate SCC.
    Appendix {
        #[command(flatten)]
        common: Common,
        /// Consumption growth turning (rho, eta) into a rate.
        #[arg(long)]
        growth_rate: Option<f64>,
        /// Population growth added to both rates in the comparison.
        #[arg(long)]
        population_growth: Option<f64>,
        /// Use these gamma parameters (alpha,beta,delta; percent units) for
        /// the comparison instead of the fitted ones.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        zig_params: Option<Vec<f64>>,
    },
    /// Correlate country SCCs with policy indicators.
    Validate {
        #[command(flatten)]
        common: Common,
        /// CSV with a `country` column followed by indicator columns.
        #[arg(long)]
        policy: PathBuf,
    },
    /// Check a configuration file and its input files.
    CheckConfig {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic survey file with the input layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 79_273)]
        respondents: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Country table providing the country list and populations.
        #[arg(long, default_value = "data/country_weights.csv")]
        weights: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Io => 1,
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            scenario,
            calibration,
            damage,
            elasticity,
        } => {
            let overrides = SccOverrides {
                scenario,
                calibration,
                damage,
                income_elasticity: elasticity,
            };
            let dir = pipeline::cmd_scc(common.load()?, &overrides)?;
            println!("{}", dir.display());
        }
        Command::Sensitivity {
            common,
            scenarios,
            damages,
            elasticities,
            calibrations,
            no_cache,
            fresh,
        } => {
            let cfg = common.load()?;
            let any_axis = scenarios.is_some() || damages.is_some() || elasticities.is_some() || calibrations.is_some();
            let axes = if any_axis {
                let ids = scc_core::scenario::ScenarioRegistry::from_file(&cfg.paths.scenarios)?
                    .scenarios
                    .into_keys();
                let base = cfg.axes(ids);
                Some(Axes {
                    scenarios: scenarios.unwrap_or(base.scenarios),
                    damages: damages.unwrap_or(base.damages),
                    elasticities: elasticities.unwrap_or(base.elasticities),
                    calibrations: calibrations.unwrap_or(base.calibrations),
                })
            } else {
                None
            };
            let opts = SensitivityOptions {
                axes,
                use_cache: !no_cache,
                fresh,
            };
            let dir = pipeline::cmd_sensitivity(cfg, &opts)?;
            println!("{}", dir.display());
        }
        Command::Appendix {
            common,
            growth_rate,
            population_growth,
            zig_params,
        } => {
            let zig_parameters = match zig_params.as_deref() {
                None => None,
                Some(&[a, b, d]) => Some((a, b, d)),
                Some(v) => return Err(Error::Config(format!("--zig-params needs alpha,beta,delta, got {} values", v.len()))),
            };
            let overrides = AppendixOverrides {
                growth_rate,
                population_growth,
                zig_parameters,
            };
            let dir = pipeline::cmd_appendix(common.load()?, &overrides)?;
            println!("{}", dir.display());
        }
        Command::Validate { common, policy } => {
            let dir = pipeline::cmd_validate(common.load()?, &policy)?;
            println!("{}", dir.display());
        }
        Command::CheckConfig { common } => {
            let cfg = common.load()?;
            cfg.validate()?;
            pipeline::Inputs::load(cfg)?;
            println!("ok");
        }
        Command::Synth {
            out,
            respondents,
            seed,
            weights,
        } => {
            let table = CountryWeights::from_csv(&weights)?;
            let countries = table
                .by_country
                .values()
                .map(|w| (w.country.clone(), w.population))
                .collect();
            let records = synthetic::generate(&SyntheticSpec::new(seed, respondents, countries))?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            synthetic::write_preferences(&records, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
