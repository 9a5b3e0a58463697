//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 7 and 8 need the public individual survey extract at
//! `data/preferences/individual.csv`; without it they fail and report the
//! same statistics for a synthetic population for information only.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use scc_core::aggregation::CountryWeights;
use scc_core::config::EngineConfig;
use scc_core::discounting::{
    certainty_equivalent_rate, fit_zig, gamma_ce_rate, zig_rate, DiscountSchedule, RateUnits, ZeroInflatedGammaFit,
    ZigFitOptions,
};
use scc_core::iam::{marginal_damage_path, DamageKind, IamConfig, MarginalDamagePath};
use scc_core::pipeline::{run_scc, run_sensitivity, Inputs, SccRun};
use scc_core::preferences::{CalibrationVariant, Gender, PreferenceRecord};
use scc_core::scc::{batch_scc, batch_scc_serial, partition_results, premium_summary, scc_for_preferences};
use scc_core::scenario::{growth_path, Scenario};
use scc_core::sensitivity::{Axes, MatrixOptions};
use scc_core::synthetic::{generate, write_preferences, SyntheticSpec};

const RESPONDENTS: usize = 79_273;

type Verdict = Result<String, String>;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").canonicalize().unwrap()
}

fn iam() -> IamConfig {
    IamConfig::from_file(data_dir().join("iam.toml")).unwrap()
}

fn close(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn c1_zig_rate() -> Verdict {
    let fit = ZeroInflatedGammaFit::from_parameters(2.24, 0.29, 0.06, RateUnits::Percent);
    let r0 = zig_rate(&fit, 0.0);
    let r100 = zig_rate(&fit, 100.0);
    let consistent = (r0 - 0.94 * gamma_ce_rate(2.24, 0.29, 0.0)).abs() < 1e-12;
    let msg = format!("r(0) = {r0:.4}%/yr, r(100) = {r100:.5}%/yr");
    if close(r0, 7.26, 0.05) && close(r100, 0.021, 0.005) && consistent {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2_two_rate() -> Verdict {
    let low = DiscountSchedule::constant(0.01, 1001).map_err(|e| e.to_string())?;
    let high = DiscountSchedule::constant(0.07, 1001).map_err(|e| e.to_string())?;
    let ce = certainty_equivalent_rate(&[(0.5, &low), (0.5, &high)]).map_err(|e| e.to_string())?;
    let (r65, r1000) = (100.0 * ce.rates[65], 100.0 * ce.rates[1000]);
    let msg = format!("r*(65) = {r65:.3}%, r*(1000) = {r1000:.3}%");
    if close(r65, 2.0, 0.05) && close(r1000, 1.1, 0.05) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_zig_recovery() -> Verdict {
    let (alpha, beta, delta) = (2.24, 0.29, 0.06);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gamma = Gamma::new(alpha, 1.0 / beta).unwrap();
    let rates: Vec<f64> = (0..100_000)
        .map(|_| if rng.random_bool(delta) { 0.0 } else { gamma.sample(&mut rng) })
        .collect();
    let fit = fit_zig(&rates, &vec![1.0; rates.len()], ZigFitOptions::default()).map_err(|e| e.to_string())?;
    let msg = format!("alpha {:.4}, beta {:.4}, delta {:.4}", fit.alpha, fit.beta, fit.delta);
    if close(fit.alpha, alpha, 0.1 * alpha) && close(fit.beta, beta, 0.1 * beta) && close(fit.delta, delta, 0.01) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// A 50-year toy run of the full climate-economy chain with quadratic damages.
fn toy_context() -> (MarginalDamagePath, Vec<f64>) {
    let n = 50;
    let years: Vec<i32> = (2020..2020 + n as i32).collect();
    let s = Scenario::new(
        "toy",
        years,
        (0..n).map(|t| 7.8e9 * (1.0 + 0.005 * t as f64)).collect(),
        (0..n).map(|t| 11_000.0 * 1.02f64.powi(t as i32)).collect(),
        vec![10.0; n],
        None,
    )
    .unwrap();
    let iam = iam();
    let spec = iam.damage_spec(DamageKind::Dice2023, 0.0).unwrap();
    let mdp = marginal_damage_path(&s, &iam.carbon_cycle, &iam.climate, &spec, 1e9, 2020).unwrap();
    (mdp, growth_path(&s))
}

fn record(row: usize, rho: f64, eta: f64, weight: f64) -> PreferenceRecord {
    PreferenceRecord {
        row,
        country: "AAA".into(),
        time_index: 0.0,
        risk_index: 0.0,
        gender: Gender::Unknown,
        age: None,
        weight,
        rho: Some(rho),
        eta: Some(eta),
    }
}

fn c4_premium_nonnegative() -> Verdict {
    let (mdp, g) = toy_context();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_premium = f64::INFINITY;
    for _ in 0..1000 {
        let size = rng.random_range(1..=200);
        let recs: Vec<PreferenceRecord> = (0..size)
            .map(|i| {
                record(
                    i,
                    rng.random_range(0.0..0.1),
                    rng.random_range(0.0..4.0),
                    rng.random_range(0.05..3.0),
                )
            })
            .collect();
        let (ok, failed) = partition_results(batch_scc(&mdp, &recs, &g));
        if !failed.is_empty() {
            return Err(format!("{} records failed", failed.len()));
        }
        let s = premium_summary(&ok, &mdp, &g).map_err(|e| e.to_string())?;
        min_premium = min_premium.min(s.premium);
    }
    let msg = format!("minimum premium over 1000 populations {min_premium:.3e} USD/tC");
    if min_premium >= -1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

#[allow(clippy::needless_range_loop)]
fn brute_force_npv(dd: &[f64], g: &[f64], pulse: usize, rho: f64, eta: f64, size: f64) -> f64 {
    let mut total = 0.0;
    for k in pulse..dd.len() {
        let mut factor = 1.0;
        for s in pulse..k {
            factor *= 1.0 / (1.0 + rho + eta * g[s]);
        }
        total += dd[k] * factor;
    }
    total / size
}

fn c5_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(1..=300);
        let pulse = rng.random_range(0..n);
        let dd: Vec<f64> = (0..n).map(|_| rng.random_range(-1e8..5e9)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-0.02..0.05)).collect();
        let mdp = MarginalDamagePath {
            scenario_id: "toy".into(),
            damage_kind: DamageKind::Dice2023,
            income_elasticity: 0.0,
            years: (2000..2000 + n as i32).collect(),
            delta_damage: dd.clone(),
            pulse_size: 1e9,
            pulse_year: 2000 + pulse as i32,
            pulse_index: pulse,
        };
        let (rho, eta) = (rng.random_range(0.0..0.1), rng.random_range(0.0..4.0));
        let fast = scc_for_preferences(&mdp, rho, eta, &g).map_err(|e| format!("case {case}: {e}"))?;
        let slow = brute_force_npv(&dd, &g, pulse, rho, eta, 1e9);
        let scale = dd[pulse..].iter().map(|d| d.abs()).sum::<f64>() / 1e9;
        worst = worst.max((fast - slow).abs() / scale.max(f64::MIN_POSITIVE));
    }
    let msg = format!("worst relative difference over 200 paths {worst:.2e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn base_scenario() -> Scenario {
    let cfg = EngineConfig::from_file(data_dir().join("config.toml")).unwrap();
    let registry = scc_core::scenario::ScenarioRegistry::from_file(&cfg.paths.scenarios).unwrap();
    registry
        .load(&cfg.run.scenario)
        .unwrap()
        .window(cfg.run.start_year, cfg.run.horizon)
        .unwrap()
}

fn c6_monotonicity() -> Verdict {
    let iam = iam();
    let s = base_scenario();
    let rhos: Vec<f64> = (0..=20).map(|i| 0.005 * i as f64).collect();
    let etas: Vec<f64> = (0..=20).map(|i| 0.2 * i as f64).collect();
    let growths = [0.0, 0.005, 0.01, 0.02, 0.04];
    let mut checked = Vec::new();
    let mut skipped = Vec::new();
    let mut violations = 0usize;
    for kind in DamageKind::ALL {
        for elasticity in [0.0, -0.36] {
            let spec = iam.damage_spec(kind, elasticity).map_err(|e| e.to_string())?;
            let mdp = marginal_damage_path(&s, &iam.carbon_cycle, &iam.climate, &spec, 1e9, 2020)
                .map_err(|e| e.to_string())?;
            if mdp.delta_damage.iter().any(|d| *d < 0.0) {
                skipped.push(format!("{kind}/{elasticity}"));
                continue;
            }
            checked.push(format!("{kind}/{elasticity}"));
            for &gc in &growths {
                let g = vec![gc; mdp.delta_damage.len()];
                let grid: Vec<Vec<f64>> = rhos
                    .iter()
                    .map(|&r| etas.iter().map(|&e| scc_for_preferences(&mdp, r, e, &g).unwrap()).collect())
                    .collect();
                for i in 0..rhos.len() {
                    for j in 0..etas.len() {
                        let v = grid[i][j];
                        if i + 1 < rhos.len() && grid[i + 1][j] > v * (1.0 + 1e-12) {
                            violations += 1;
                        }
                        if j + 1 < etas.len() && grid[i][j + 1] > v * (1.0 + 1e-12) {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    let msg = format!(
        "{} nonnegative paths checked ({}), {} with net benefits skipped ({}), {violations} violations",
        checked.len(),
        checked.join(" "),
        skipped.len(),
        skipped.join(" ")
    );
    if violations == 0 && !checked.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn synthetic_survey(dir: &Path) -> PathBuf {
    let weights = CountryWeights::from_csv(data_dir().join("country_weights.csv")).unwrap();
    let countries = weights.by_country.values().map(|w| (w.country.clone(), w.population)).collect();
    let recs = generate(&SyntheticSpec::new(42, RESPONDENTS, countries)).unwrap();
    let path = dir.join("synthetic.csv");
    write_preferences(&recs, &path).unwrap();
    path
}

fn base_run(preferences: &Path) -> (SccRun, f64) {
    let mut cfg = EngineConfig::from_file(data_dir().join("config.toml")).unwrap();
    cfg.paths.preferences = preferences.to_path_buf();
    let start = Instant::now();
    let inputs = Inputs::load(cfg).unwrap();
    let run = run_scc(&inputs).unwrap();
    (run, start.elapsed().as_secs_f64())
}

fn headline(run: &SccRun) -> String {
    let row: Vec<String> = run
        .aggregates
        .iter()
        .map(|a| format!("{} {:.1}/{:.1}/{:.1}", a.scheme, a.ref_scc, a.mean_scc, a.premium))
        .collect();
    format!("ratio {:.2}; {}", run.premium.ratio, row.join(", "))
}

fn check_headline(run: &SccRun, secs: f64) -> Verdict {
    let d = &run.aggregates[0];
    let within = |x: f64, target: f64| (x - target).abs() <= 0.5 * target;
    let ratio = run.premium.ratio;
    let ordered = run.aggregates.windows(2).all(|w| w[0].mean_scc < w[1].mean_scc);
    let msg = format!("{} respondents in {secs:.1}s; {}", run.results.len(), headline(run));
    if within(d.ref_scc, 5.4)
        && within(d.mean_scc, 30.5)
        && within(d.premium, 25.1)
        && (5.6 / 2.0..=5.6 * 2.0).contains(&ratio)
        && ordered
        && secs < 60.0
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn check_shape(run: &SccRun) -> Verdict {
    let d = &run.distribution;
    let msg = format!(
        "mode bin {:.1}, median {:.2}, mean {:.2}, mean at percentile {:.1}",
        d.mode, d.median, d.mean, d.percentile_of_mean
    );
    if d.mode < d.median && d.median < d.mean && (70.0..=85.0).contains(&d.percentile_of_mean) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_determinism(preferences: &Path) -> Verdict {
    let mut cfg = EngineConfig::from_file(data_dir().join("config.toml")).unwrap();
    cfg.paths.preferences = preferences.to_path_buf();
    let inputs = Inputs::load(cfg).map_err(|e| e.to_string())?;
    let (_, _, records) = inputs.calibrate(CalibrationVariant::Base).map_err(|e| e.to_string())?;
    let loader = |id: &str| inputs.scenario(id);
    let setup = inputs.model_setup(&loader);
    let ctx = setup
        .damage_context("ssp2", DamageKind::Dice2023, -0.36)
        .map_err(|e| e.to_string())?;
    let bits = |v: Vec<scc_core::Result<scc_core::scc::SccResult>>| -> Vec<u64> {
        v.into_iter().map(|r| r.map(|r| r.scc.to_bits()).unwrap_or(u64::MAX)).collect()
    };
    let parallel = bits(batch_scc(&ctx.mdp, &records, &ctx.growth));
    let serial = bits(batch_scc_serial(&ctx.mdp, &records, &ctx.growth));
    let batch_equal = parallel == serial;

    let axes = Axes {
        scenarios: vec!["ssp2".into(), "ssp5".into()],
        damages: vec![DamageKind::Dice2023, DamageKind::HowardSterner],
        elasticities: vec![0.0, -0.36],
        calibrations: vec![CalibrationVariant::Base, CalibrationVariant::GeoRestricted],
    };
    let run = |use_cache| {
        run_sensitivity(&inputs, &axes, &MatrixOptions { use_cache, checkpoint: None })
            .map(|cells| serde_json::to_string(&cells).unwrap())
            .map_err(|e| e.to_string())
    };
    let matrix_equal = run(true)? == run(false)?;
    let msg = format!(
        "{} respondents serial == parallel: {batch_equal}; {}-cell matrix cache on == off: {matrix_equal}",
        records.len(),
        axes.cells().len()
    );
    if batch_equal && matrix_equal {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().unwrap();
    let extract = data_dir().join("preferences/individual.csv");
    let synthetic = synthetic_survey(scratch.path());

    let mut outcomes: Vec<(u8, &str, Verdict)> = vec![
        (1, "zero-inflated gamma rate", c1_zig_rate()),
        (2, "two-rate certainty-equivalent curve", c2_two_rate()),
        (3, "zero-inflated gamma fit recovery", c3_zig_recovery()),
        (4, "premium non-negativity", c4_premium_nonnegative()),
        (5, "brute-force NPV oracle", c5_oracle()),
        (6, "monotonicity in rho and eta", c6_monotonicity()),
    ];

    let (syn_run, syn_secs) = base_run(&synthetic);
    if extract.is_file() {
        let (run, secs) = base_run(&extract);
        outcomes.push((7, "headline reproduction and throughput", check_headline(&run, secs)));
        outcomes.push((8, "distribution shape", check_shape(&run)));
    } else {
        let missing = format!("survey extract not found at {}", extract.display());
        let info7 = format!(
            "{missing}; synthetic {RESPONDENTS}-respondent base run for information: {}",
            check_headline(&syn_run, syn_secs).unwrap_or_else(|m| m)
        );
        let info8 = format!(
            "{missing}; synthetic run for information: {}",
            check_shape(&syn_run).unwrap_or_else(|m| m)
        );
        outcomes.push((7, "headline reproduction and throughput", Err(info7)));
        outcomes.push((8, "distribution shape", Err(info8)));
    }
    outcomes.push((9, "determinism", c9_determinism(&synthetic)));

    let mut failures = 0;
    for (id, name, verdict) in &outcomes {
        match verdict {
            Ok(detail) => println!("criterion {id} PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {id} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", outcomes.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
