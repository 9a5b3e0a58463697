//! Impulse-response carbon cycle: atmospheric CO2 as a sum of boxes, each
//! decaying exponentially with its own timescale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonCycleParams {
    /// Fraction of each emission entering each box; sums to one.
    pub shares: Vec<f64>,
    /// Box decay times in years. `inf` marks a permanent box.
    pub timescales: Vec<f64>,
    pub preindustrial_ppm: f64,
    pub ppm_per_gtc: f64,
    /// Anomaly (ppm above preindustrial) held in each box at the first year.
    #[serde(default)]
    pub initial_boxes_ppm: Vec<f64>,
}

impl CarbonCycleParams {
    pub fn validate(&self) -> Result<()> {
        if self.shares.is_empty() || self.shares.len() != self.timescales.len() {
            return Err(Error::Config(format!(
                "carbon cycle: {} shares but {} timescales",
                self.shares.len(),
                self.timescales.len()
            )));
        }
        if !self.initial_boxes_ppm.is_empty() && self.initial_boxes_ppm.len() != self.shares.len() {
            return Err(Error::Config(
                "carbon cycle: initial_boxes_ppm must match the number of boxes".into(),
            ));
        }
        if self.shares.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::Config("carbon cycle: shares must be nonnegative".into()));
        }
        let sum: f64 = self.shares.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("carbon cycle: shares sum to {sum}, not 1")));
        }
        if self.timescales.iter().any(|&tau| !(tau > 0.0)) {
            return Err(Error::Config("carbon cycle: timescales must be positive".into()));
        }
        if !(self.preindustrial_ppm > 0.0) || !(self.ppm_per_gtc > 0.0) {
            return Err(Error::Config(
                "carbon cycle: preindustrial_ppm and ppm_per_gtc must be positive".into(),
            ));
        }
        Ok(())
    }

    fn retention(&self) -> Vec<f64> {
        self.timescales.iter().map(|tau| (-1.0 / tau).exp()).collect()
    }
}

/// Atmospheric concentration (ppm) for an annual emissions series (GtC/yr).
///
/// Emissions in year `t` enter the boxes in year `t`, so a lone pulse at
/// `t = 0` is fully airborne at `t = 0`.
pub fn concentration_path(params: &CarbonCycleParams, emissions: &[f64]) -> Vec<f64> {
    let retention = params.retention();
    let mut boxes: Vec<f64> = if params.initial_boxes_ppm.is_empty() {
        vec![0.0; params.shares.len()]
    } else {
        params.initial_boxes_ppm.clone()
    };
    let mut out = Vec::with_capacity(emissions.len());
    for (t, &e) in emissions.iter().enumerate() {
        let added = params.ppm_per_gtc * e;
        for (j, b) in boxes.iter_mut().enumerate() {
            if t > 0 {
                *b *= retention[j];
            }
            *b += params.shares[j] * added;
        }
        out.push(params.preindustrial_ppm + boxes.iter().sum::<f64>());
    }
    out
}
