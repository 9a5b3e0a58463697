//! Gamma discounting and the zero-inflated gamma fit of individual rates.
//!
//! The closed forms here are continuous-time: exponential discounting
//! `exp(-r t)` mixed over a gamma density of `r`. Rates are expressed in the
//! units tagged on the fit; `alpha / (beta + t)` is evaluated as written, with
//! `t` in years and the result in the fit's rate units.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnits {
    /// 0.05 means 5% per year.
    Fraction,
    /// 5.0 means 5% per year.
    Percent,
}

impl RateUnits {
    /// Multiplier from a fraction-per-year rate into these units.
    pub fn scale(self) -> f64 {
        match self {
            RateUnits::Fraction => 1.0,
            RateUnits::Percent => 100.0,
        }
    }
}

/// Certainty-equivalent (forward) rate under gamma-distributed rates with
/// shape `alpha` and rate `beta`: `alpha / (beta + t)`.
pub fn gamma_ce_rate(alpha: f64, beta: f64, t: f64) -> f64 {
    alpha / (beta + t)
}

/// `E[exp(-r t)]` for `r ~ Gamma(alpha, beta)`, i.e. `(beta / (beta + t))^alpha`.
pub fn gamma_mixture_factor(alpha: f64, beta: f64, t: f64) -> f64 {
    (-alpha * (t / beta).ln_1p()).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroInflatedGammaFit {
    pub alpha: f64,
    pub beta: f64,
    /// Probability mass at a rate of exactly zero.
    pub delta: f64,
    /// Weighted mean of all rates, zeros included.
    pub mu: f64,
    /// Weighted variance of all rates, zeros included.
    pub sigma2: f64,
    pub mise: f64,
    pub units: RateUnits,
    pub bin_width: f64,
    pub observations: usize,
    pub converged: bool,
}

impl ZeroInflatedGammaFit {
    /// A fit from published parameters, with no data behind it.
    pub fn from_parameters(alpha: f64, beta: f64, delta: f64, units: RateUnits) -> Self {
        let mean = alpha / beta;
        let var = alpha / (beta * beta);
        ZeroInflatedGammaFit {
            alpha,
            beta,
            delta,
            mu: (1.0 - delta) * mean,
            sigma2: (1.0 - delta) * (var + mean * mean) - ((1.0 - delta) * mean).powi(2),
            mise: f64::NAN,
            units,
            bin_width: f64::NAN,
            observations: 0,
            converged: true,
        }
    }

    /// Density of the positive part, integrating to `1 - delta`.
    pub fn density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let ln = self.alpha * self.beta.ln() - statrs::function::gamma::ln_gamma(self.alpha)
            + (self.alpha - 1.0) * r.ln()
            - self.beta * r;
        (1.0 - self.delta) * ln.exp()
    }
}

/// Zero-inflated gamma certainty-equivalent rate from fitted parameters:
/// `(1 - delta) alpha / (beta + t)`, in the fit's units.
pub fn zig_rate(fit: &ZeroInflatedGammaFit, t: f64) -> f64 {
    (1.0 - fit.delta) * gamma_ce_rate(fit.alpha, fit.beta, t)
}

/// Moment form `(1 - delta) mu / (1 + t sigma2 / mu)`. Agrees with
/// [`zig_rate`] only when `mu` and `sigma2` are the moments of the gamma
/// part (`sigma2 / mu = 1 / beta`).
pub fn zig_rate_moment(delta: f64, mu: f64, sigma2: f64, t: f64) -> f64 {
    (1.0 - delta) * mu / (1.0 + t * sigma2 / mu)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZigFitOptions {
    /// Histogram bin width, in `units`.
    pub bin_width: f64,
    pub units: RateUnits,
    pub min_observations: usize,
}

impl Default for ZigFitOptions {
    fn default() -> Self {
        Self {
            bin_width: 0.25,
            units: RateUnits::Percent,
            min_observations: 100,
        }
    }
}

/// Weighted histogram of the positive rates, as a density whose total mass
/// is the positive share `1 - delta`.
struct PositiveHistogram {
    edges: Vec<f64>,
    density: Vec<f64>,
}

impl PositiveHistogram {
    fn build(rates: &[f64], weights: &[f64], total_weight: f64, width: f64) -> Self {
        let max = rates.iter().copied().filter(|&r| r > 0.0).fold(0.0, f64::max);
        // Empty bins past the data penalize fitted mass in the far tail.
        let bins = ((2.0 * max / width).ceil() as usize).clamp(2, 200_000);
        let data_bins = ((max / width).floor() as usize + 1).min(bins);
        let mut mass = vec![0.0; bins];
        for (&r, &w) in rates.iter().zip(weights) {
            if r > 0.0 {
                let b = ((r / width) as usize).min(data_bins - 1);
                mass[b] += w;
            }
        }
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let density = mass.iter().map(|m| m / (total_weight * width)).collect();
        PositiveHistogram { edges, density }
    }

    /// Integrated squared error against `(1 - delta) * Gamma(alpha, beta)`,
    /// using bin-averaged model densities.
    fn ise(&self, alpha: f64, beta: f64, delta: f64) -> f64 {
        let Ok(dist) = Gamma::new(alpha, beta) else {
            return f64::INFINITY;
        };
        let width = self.edges[1] - self.edges[0];
        let mut prev = 0.0;
        let mut total = 0.0;
        for (i, h) in self.density.iter().enumerate() {
            let cdf = dist.cdf(self.edges[i + 1]);
            let model = (1.0 - delta) * (cdf - prev) / width;
            prev = cdf;
            total += (h - model).powi(2) * width;
        }
        total
    }
}

/// Fits a zero-inflated gamma distribution to weighted individual rates.
///
/// `delta` is the weighted share of exact zeros. `(alpha, beta)` minimize the
/// integrated squared error between the fitted density and the weighted
/// histogram of the positive rates. Rates must already be in `opts.units`.
pub fn fit_zig(rates: &[f64], weights: &[f64], opts: ZigFitOptions) -> Result<ZeroInflatedGammaFit> {
    if rates.len() != weights.len() {
        return Err(Error::Alignment(format!(
            "{} rates but {} weights",
            rates.len(),
            weights.len()
        )));
    }
    if rates.len() < opts.min_observations {
        return Err(Error::InsufficientData(format!(
            "zero-inflated gamma fit needs at least {} observations, got {}",
            opts.min_observations,
            rates.len()
        )));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("rates must be finite and nonnegative, found {r}")));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Domain("weights must be positive".into()));
    }
    if !(opts.bin_width > 0.0) {
        return Err(Error::Config("bin width must be positive".into()));
    }

    let total: f64 = weights.iter().sum();
    let zero_weight: f64 = rates
        .iter()
        .zip(weights)
        .filter(|(r, _)| **r == 0.0)
        .map(|(_, w)| w)
        .sum();
    let delta = zero_weight / total;
    if zero_weight == total {
        return Err(Error::DegenerateFit("all rates are zero".into()));
    }

    let (pos_r, pos_w): (Vec<f64>, Vec<f64>) = rates
        .iter()
        .zip(weights)
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, w)| (*r, *w))
        .unzip();
    let m = stats::weighted_mean(&pos_r, &pos_w).unwrap();
    let v = stats::weighted_variance(&pos_r, &pos_w).unwrap();
    let (alpha0, beta0) = if v > 0.0 {
        (m * m / v, m / v)
    } else {
        (100.0, 100.0 / m)
    };

    let hist = PositiveHistogram::build(rates, weights, total, opts.bin_width);
    let objective = |x: &[f64]| hist.ise(x[0].exp(), x[1].exp(), delta);
    let nm = NelderMeadOptions {
        max_iter: 4_000,
        f_tol: 1e-16,
        x_tol: 1e-9,
        step: 0.3,
    };
    let first = nelder_mead(objective, &[alpha0.ln(), beta0.ln()], nm);
    // restart from the optimum to escape a collapsed simplex
    let best = nelder_mead(objective, &first.x, NelderMeadOptions { step: 0.05, ..nm });

    Ok(ZeroInflatedGammaFit {
        alpha: best.x[0].exp(),
        beta: best.x[1].exp(),
        delta,
        mu: stats::weighted_mean(rates, weights).unwrap(),
        sigma2: stats::weighted_variance(rates, weights).unwrap(),
        mise: best.value,
        units: opts.units,
        bin_width: opts.bin_width,
        observations: rates.len(),
        converged: first.converged && best.converged,
    })
}

/// Refits at several bin widths to show how sensitive the fit is to binning.
pub fn fit_zig_binning_sensitivity(
    rates: &[f64],
    weights: &[f64],
    opts: ZigFitOptions,
    width_multipliers: &[f64],
) -> Result<Vec<ZeroInflatedGammaFit>> {
    width_multipliers
        .iter()
        .map(|k| {
            fit_zig(
                rates,
                weights,
                ZigFitOptions {
                    bin_width: opts.bin_width * k,
                    ..opts
                },
            )
        })
        .collect()
}
