//! One-box energy balance: radiative forcing relaxes global mean surface
//! temperature towards equilibrium with a first-order lag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateParams {
    /// Equilibrium warming per CO2 doubling, degC.
    pub sensitivity: f64,
    /// e-folding time of the lag, years.
    pub response_time: f64,
    /// Forcing per CO2 doubling, W/m2.
    pub forcing_2x: f64,
    /// Temperature anomaly in the first year, degC.
    #[serde(default)]
    pub initial_temperature: f64,
}

impl ClimateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity > 0.0) || !(self.response_time > 0.0) || !(self.forcing_2x > 0.0) {
            return Err(Error::Config(
                "climate: sensitivity, response_time and forcing_2x must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Total radiative forcing, W/m2.
pub fn forcing(params: &ClimateParams, concentration: f64, preindustrial_ppm: f64, exo: f64) -> f64 {
    params.forcing_2x * (concentration / preindustrial_ppm).log2() + exo
}

/// Temperature anomaly path (degC) for a concentration path (ppm).
///
/// `T(t+1) = T(t) + (S F(t) / F2x - T(t)) / response_time`.
pub fn temperature_path(
    params: &ClimateParams,
    concentration: &[f64],
    exo_forcing: &[f64],
    preindustrial_ppm: f64,
) -> Result<Vec<f64>> {
    if concentration.len() != exo_forcing.len() {
        return Err(Error::Alignment(format!(
            "concentration has {} years, exogenous forcing {}",
            concentration.len(),
            exo_forcing.len()
        )));
    }
    if let Some(c) = concentration.iter().find(|&&c| !(c > 0.0)) {
        return Err(Error::Domain(format!("concentration must be positive, found {c}")));
    }
    let mut temps = Vec::with_capacity(concentration.len());
    let mut temp = params.initial_temperature;
    for (&c, &exo) in concentration.iter().zip(exo_forcing) {
        temps.push(temp);
        let f = forcing(params, c, preindustrial_ppm, exo);
        temp += (params.sensitivity * f / params.forcing_2x - temp) / params.response_time;
    }
    Ok(temps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ClimateParams {
        ClimateParams {
            sensitivity: 3.0,
            response_time: 44.0,
            forcing_2x: 3.7,
            initial_temperature: 0.0,
        }
    }

    #[test]
    fn zero_forcing_keeps_zero() {
        let t = temperature_path(&params(), &[280.0; 100], &[0.0; 100], 280.0).unwrap();
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubled_co2_converges_to_sensitivity() {
        let n = 2000;
        let t = temperature_path(&params(), &vec![560.0; n], &vec![0.0; n], 280.0).unwrap();
        assert!((t[n - 1] - 3.0).abs() < 1e-9);
    }

    /// Closed-form oracle for a constant forcing step from rest:
    /// `T(n) = Teq (1 - (1 - 1/tau)^n)`.
    #[test]
    fn step_forcing_matches_closed_form() {
        let p = params();
        let n = 400;
        let t = temperature_path(&p, &vec![560.0; n], &vec![0.0; n], 280.0).unwrap();
        let lag = 1.0 - 1.0 / p.response_time;
        for (k, &v) in t.iter().enumerate() {
            let oracle = p.sensitivity * (1.0 - lag.powi(k as i32));
            assert!((v - oracle).abs() < 1e-6, "year {k}: {v} vs {oracle}");
        }
        // roughly (1 - 1/e) of equilibrium after one response time
        let at_tau = t[p.response_time as usize] / p.sensitivity;
        assert!((at_tau - (1.0 - (-1.0f64).exp())).abs() < 0.01);
    }

    #[test]
    fn bounded_for_bounded_forcing() {
        let p = params();
        let conc: Vec<f64> = (0..500).map(|i| 400.0 + 200.0 * ((i as f64) / 7.0).sin()).collect();
        let t = temperature_path(&p, &conc, &vec![0.5; 500], 280.0).unwrap();
        let fmax = forcing(&p, 600.0, 280.0, 0.5);
        let bound = p.sensitivity * fmax / p.forcing_2x;
        assert!(t.iter().all(|&v| v.abs() <= bound + 1e-12));
    }

    #[test]
    fn nonpositive_concentration_is_domain_error() {
        assert!(matches!(
            temperature_path(&params(), &[280.0, 0.0], &[0.0, 0.0], 280.0),
            Err(Error::Domain(_))
        ));
    }
}
