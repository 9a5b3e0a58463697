use serde::{Deserialize, Serialize};

use super::carbon::{concentration_path, CarbonCycleParams};
use super::climate::{temperature_path, ClimateParams};
use super::damage::{damage_fraction, DamageKind, DamageSpec};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const TONNES_PER_GT: f64 = 1e9;

/// Undiscounted consumption loss caused by an emission pulse. Independent of
/// time and risk preferences, so one path serves every respondent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDamagePath {
    pub scenario_id: String,
    pub damage_kind: DamageKind,
    pub income_elasticity: f64,
    pub years: Vec<i32>,
    /// 2010 USD per year.
    pub delta_damage: Vec<f64>,
    /// tC
    pub pulse_size: f64,
    pub pulse_year: i32,
    pub pulse_index: usize,
}

/// One deterministic run of the climate-economy chain.
#[derive(Debug, Clone)]
pub struct ClimateRun {
    pub concentration: Vec<f64>,
    pub temperature: Vec<f64>,
    /// 2010 USD per year.
    pub damages: Vec<f64>,
}

pub fn simulate(
    s: &Scenario,
    emissions: &[f64],
    cc: &CarbonCycleParams,
    cl: &ClimateParams,
    d: &DamageSpec,
    base_income: f64,
) -> Result<ClimateRun> {
    let concentration = concentration_path(cc, emissions);
    let temperature = temperature_path(cl, &concentration, &s.exo_forcing, cc.preindustrial_ppm)?;
    let output = s.gross_output();
    let damages = temperature
        .iter()
        .zip(&s.income_pc)
        .zip(&output)
        .map(|((&t, &y), &q)| Ok(damage_fraction(d, t, y / base_income)? * q))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ClimateRun {
        concentration,
        temperature,
        damages,
    })
}

/// Runs the baseline and a pulse run that differ only by `pulse` tC added to
/// emissions in `pulse_year`, and returns the damage difference.
///
/// Damages scale with per-capita income relative to its `pulse_year` level.
pub fn marginal_damage_path(
    s: &Scenario,
    cc: &CarbonCycleParams,
    cl: &ClimateParams,
    d: &DamageSpec,
    pulse: f64,
    pulse_year: i32,
) -> Result<MarginalDamagePath> {
    if !(pulse >= 0.0) || !pulse.is_finite() {
        return Err(Error::Domain(format!("pulse must be nonnegative, found {pulse}")));
    }
    let pulse_index = s.index_of(pulse_year).ok_or_else(|| {
        Error::Range(format!(
            "pulse year {pulse_year} outside scenario {} ({}..={})",
            s.id,
            s.start_year(),
            s.end_year()
        ))
    })?;
    cc.validate()?;
    cl.validate()?;

    let base_income = s.income_pc[pulse_index];
    let base = simulate(s, &s.emissions, cc, cl, d, base_income)?;
    let mut pulsed_emissions = s.emissions.clone();
    pulsed_emissions[pulse_index] += pulse / TONNES_PER_GT;
    let pulsed = simulate(s, &pulsed_emissions, cc, cl, d, base_income)?;

    let delta_damage: Vec<f64> = pulsed
        .damages
        .iter()
        .zip(&base.damages)
        .map(|(p, b)| p - b)
        .collect();
    if let Some(v) = delta_damage.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite marginal damage {v}")));
    }
    Ok(MarginalDamagePath {
        scenario_id: s.id.clone(),
        damage_kind: d.kind,
        income_elasticity: d.income_elasticity,
        years: s.years.clone(),
        delta_damage,
        pulse_size: pulse,
        pulse_year,
        pulse_index,
    })
}

#[cfg(test)]
mod tests {
    use super::super::damage::DamageFunction;
    use super::*;

    fn toy_scenario() -> Scenario {
        let n = 281;
        let years: Vec<i32> = (2020..2020 + n).collect();
        let pop: Vec<f64> = (0..n).map(|i| 7.8e9 * 1.004f64.powi(i.min(80))).collect();
        let inc: Vec<f64> = (0..n).map(|i| 10_500.0 * 1.018f64.powi(i)).collect();
        let em: Vec<f64> = (0..n).map(|i| (11.0 - 0.05 * i as f64).max(0.0)).collect();
        Scenario::new("toy", years, pop, inc, em, None).unwrap()
    }

    fn cc() -> CarbonCycleParams {
        CarbonCycleParams {
            shares: vec![0.13, 0.20, 0.32, 0.25, 0.10],
            timescales: vec![f64::INFINITY, 363.0, 74.0, 17.0, 2.0],
            preindustrial_ppm: 280.0,
            ppm_per_gtc: 1.0 / 2.13,
            initial_boxes_ppm: vec![60.0, 38.0, 24.0, 8.0, 2.0],
        }
    }

    fn cl() -> ClimateParams {
        ClimateParams {
            sensitivity: 3.0,
            response_time: 44.0,
            forcing_2x: 3.7,
            initial_temperature: 1.2,
        }
    }

    fn quad(eps: f64) -> DamageSpec {
        DamageSpec {
            kind: DamageKind::Dice2023,
            function: DamageFunction::Polynomial {
                coefficients: vec![0.0, 0.003467],
            },
            income_elasticity: eps,
        }
    }

    #[test]
    fn zero_pulse_zero_damage() {
        let m = marginal_damage_path(&toy_scenario(), &cc(), &cl(), &quad(-0.36), 0.0, 2020).unwrap();
        assert!(m.delta_damage.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn causal_before_pulse_year() {
        let m = marginal_damage_path(&toy_scenario(), &cc(), &cl(), &quad(-0.36), 1e9, 2050).unwrap();
        assert_eq!(m.pulse_index, 30);
        assert!(m.delta_damage[..30].iter().all(|&v| v == 0.0));
        assert!(m.delta_damage[31..].iter().any(|&v| v > 0.0));
    }

    #[test]
    fn halving_pulse_halves_damage() {
        let s = toy_scenario();
        let full = marginal_damage_path(&s, &cc(), &cl(), &quad(-0.36), 1e9, 2020).unwrap();
        let half = marginal_damage_path(&s, &cc(), &cl(), &quad(-0.36), 5e8, 2020).unwrap();
        for (f, h) in full.delta_damage.iter().zip(&half.delta_damage) {
            if f.abs() > 0.0 {
                assert!((2.0 * h / f - 1.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn quadratic_without_elasticity_is_nonnegative() {
        let m = marginal_damage_path(&toy_scenario(), &cc(), &cl(), &quad(0.0), 1e9, 2020).unwrap();
        assert!(m.delta_damage.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn bilinear_benefits_early_damages_late() {
        let d = DamageSpec {
            kind: DamageKind::TolC,
            function: DamageFunction::Bilinear {
                slope_low: -0.005,
                breakpoint: 1.8,
                slope_high: 0.012,
            },
            income_elasticity: 0.0,
        };
        let m = marginal_damage_path(&toy_scenario(), &cc(), &cl(), &d, 1e9, 2020).unwrap();
        let first_nonzero = m.delta_damage.iter().find(|v| **v != 0.0).unwrap();
        assert!(*first_nonzero < 0.0);
        assert!(*m.delta_damage.last().unwrap() > 0.0);
    }

    #[test]
    fn pulse_year_outside_is_range_error() {
        let r = marginal_damage_path(&toy_scenario(), &cc(), &cl(), &quad(0.0), 1e9, 2019);
        assert!(matches!(r, Err(Error::Range(_))));
    }

    #[test]
    fn deterministic() {
        let s = toy_scenario();
        let a = marginal_damage_path(&s, &cc(), &cl(), &quad(-0.36), 1e9, 2020).unwrap();
        let b = marginal_damage_path(&s, &cc(), &cl(), &quad(-0.36), 1e9, 2020).unwrap();
        assert_eq!(a, b);
    }
}
