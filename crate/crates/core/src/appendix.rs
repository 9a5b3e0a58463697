//! Declining discount rates implied by preference heterogeneity: the
//! two-rate certainty-equivalent curve, the zero-inflated gamma curves fitted
//! to respondents' Ramsey rates, and the SCC under a constant versus a
//! declining rate.

use serde::{Deserialize, Serialize};

use crate::discounting::{
    certainty_equivalent_rate, gamma_ce_rate, zig_rate, zig_rate_moment, DiscountSchedule, ZeroInflatedGammaFit,
};
use crate::error::{Error, Result};
use crate::iam::MarginalDamagePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoRatePoint {
    pub t: usize,
    pub factor_low: f64,
    pub factor_high: f64,
    /// Equal-weight mean of the two factors.
    pub factor_ce: f64,
    /// Annualized certainty-equivalent rate.
    pub rate_ce: f64,
}

/// Certainty-equivalent curve of two equally likely constant rates over
/// `t = 0..=horizon`.
pub fn two_rate_curve(low: f64, high: f64, horizon: usize) -> Result<Vec<TwoRatePoint>> {
    let a = DiscountSchedule::constant(low, horizon + 1)?;
    let b = DiscountSchedule::constant(high, horizon + 1)?;
    let ce = certainty_equivalent_rate(&[(1.0, &a), (1.0, &b)])?;
    Ok((0..=horizon)
        .map(|t| TwoRatePoint {
            t,
            factor_low: a.factors[t],
            factor_high: b.factors[t],
            factor_ce: ce.factors[t],
            rate_ce: ce.rates[t],
        })
        .collect())
}

/// Individual constant Ramsey rates `rho + eta g`, as fractions per year.
pub fn respondent_rates(prefs: impl IntoIterator<Item = (f64, f64)>, growth: f64) -> Vec<f64> {
    prefs.into_iter().map(|(rho, eta)| rho + eta * growth).collect()
}

/// Annualized certainty-equivalent rate of weighted constant rates at
/// `t = 0..=horizon`: `r*(t) = (sum w_i (1+r_i)^-t / sum w_i)^(-1/t) - 1`,
/// with `r*(0)` the weighted mean rate.
pub fn empirical_ce_curve(rates: &[f64], weights: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if rates.len() != weights.len() {
        return Err(Error::Alignment(format!("{} rates but {} weights", rates.len(), weights.len())));
    }
    if rates.is_empty() {
        return Err(Error::Empty("no rates".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > -1.0)) {
        return Err(Error::Domain(format!("rate {r} <= -1")));
    }
    let total: f64 = weights.iter().sum();
    let shrink: Vec<f64> = rates.iter().map(|r| 1.0 / (1.0 + r)).collect();
    let mut d: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(rates.iter().zip(weights).map(|(r, w)| r * w).sum::<f64>() / total);
    for t in 1..=horizon {
        for (di, s) in d.iter_mut().zip(&shrink) {
            *di *= s;
        }
        let mean: f64 = d.iter().sum();
        out.push(mean.powf(-1.0 / t as f64) - 1.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCurvePoint {
    pub t: usize,
    /// Certainty-equivalent rate of the respondents' own rates.
    pub empirical: f64,
    /// `(1 - delta) alpha / (beta + t)`.
    pub zig: f64,
    /// `alpha / (beta + t)`, ignoring the mass at zero.
    pub gamma: f64,
    /// `(1 - delta) mu / (1 + t sigma2 / mu)` with the sample moments.
    pub moment: f64,
}

/// All curves in fractions per year.
pub fn rate_curves(rates: &[f64], weights: &[f64], fit: &ZeroInflatedGammaFit, horizon: usize) -> Result<Vec<RateCurvePoint>> {
    let empirical = empirical_ce_curve(rates, weights, horizon)?;
    let k = fit.units.scale();
    Ok(empirical
        .into_iter()
        .enumerate()
        .map(|(t, e)| {
            let tf = t as f64;
            RateCurvePoint {
                t,
                empirical: e,
                zig: zig_rate(fit, tf) / k,
                gamma: gamma_ce_rate(fit.alpha, fit.beta, tf) / k,
                moment: zig_rate_moment(fit.delta, fit.mu, fit.sigma2, tf) / k,
            }
        })
        .collect())
}

/// NPV per tonne of the damages from the pulse onward, discounting year `k`
/// after the pulse with `prod_{s<k} (1 + rate(s))^-1`.
pub fn scc_with_rates(mdp: &MarginalDamagePath, rate: impl Fn(usize) -> f64) -> Result<f64> {
    if !(mdp.pulse_size > 0.0) {
        return Err(Error::Domain("pulse size must be positive".into()));
    }
    let mut factor = 1.0;
    let mut npv = 0.0;
    for (k, dd) in mdp.delta_damage[mdp.pulse_index..].iter().enumerate() {
        npv += factor * dd;
        let r = rate(k);
        if !(r > -1.0) {
            return Err(Error::Domain(format!("discount rate {r} <= -1 at year {k}")));
        }
        factor /= 1.0 + r;
    }
    Ok(npv / mdp.pulse_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    /// Fitted certainty-equivalent rate at `t = 0`, fraction per year.
    pub initial_rate: f64,
    pub population_growth: f64,
    /// SCC at the constant rate `initial_rate + population_growth`.
    pub scc_constant: f64,
    /// SCC at the declining rate `zig(t) + population_growth`.
    pub scc_declining: f64,
}

/// SCC under the fitted declining rate versus holding its initial value
/// constant, both with population growth `n` added.
pub fn constant_vs_declining(mdp: &MarginalDamagePath, fit: &ZeroInflatedGammaFit, n: f64) -> Result<RateComparison> {
    let k = fit.units.scale();
    let initial_rate = zig_rate(fit, 0.0) / k;
    Ok(RateComparison {
        initial_rate,
        population_growth: n,
        scc_constant: scc_with_rates(mdp, |_| initial_rate + n)?,
        scc_declining: scc_with_rates(mdp, |t| zig_rate(fit, t as f64) / k + n)?,
    })
}
