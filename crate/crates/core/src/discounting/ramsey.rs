use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the `rates` column of a schedule means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `rates[t]` discounts year `t` to `t+1`: `D(t+1) = D(t) / (1 + r(t))`.
    Forward,
    /// `rates[t]` is the constant rate reproducing `D(t)`: `D(t) = (1 + r(t))^-t`.
    Annualized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountSchedule {
    pub years: Vec<i32>,
    pub factors: Vec<f64>,
    pub rates: Vec<f64>,
    pub convention: RateConvention,
}

impl DiscountSchedule {
    /// Discrete compounding of forward rates, `D(t) = prod_{s<t} (1 + r(s))^-1`.
    pub fn from_forward_rates(years: Vec<i32>, rates: Vec<f64>) -> Result<Self> {
        if years.len() != rates.len() {
            return Err(Error::Alignment(format!(
                "{} years but {} rates",
                years.len(),
                rates.len()
            )));
        }
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, &r)| !(r > -1.0)) {
            return Err(Error::Domain(format!("discount rate {r} <= -1 at index {i}")));
        }
        let mut factors = Vec::with_capacity(rates.len());
        let mut d = 1.0;
        for &r in &rates {
            factors.push(d);
            d /= 1.0 + r;
        }
        Ok(DiscountSchedule {
            years,
            factors,
            rates,
            convention: RateConvention::Forward,
        })
    }

    /// Constant rate over `len` years starting at year 0.
    pub fn constant(rate: f64, len: usize) -> Result<Self> {
        Self::from_forward_rates((0..len as i32).collect(), vec![rate; len])
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The constant annual rate equivalent to `D(t)`, for `t >= 1`.
    pub fn annualized_rate(&self, t: usize) -> f64 {
        if t == 0 {
            return self.rates[0];
        }
        self.factors[t].powf(-1.0 / t as f64) - 1.0
    }
}

/// How population growth enters a Ramsey schedule.
#[derive(Debug, Clone, Copy)]
pub enum PopulationTreatment<'a> {
    /// Population growth is already inside the aggregate damage path.
    Embodied,
    /// Add `n(t)` to the discount rate.
    Added(&'a [f64]),
}

/// Ramsey discounting, `r(t) = rho + eta g(t)` (plus `n(t)` when added).
pub fn ramsey_schedule(
    years: &[i32],
    rho: f64,
    eta: f64,
    growth: &[f64],
    population: PopulationTreatment<'_>,
) -> Result<DiscountSchedule> {
    if !(rho >= 0.0) || !(eta >= 0.0) {
        return Err(Error::Domain(format!(
            "rho and eta must be nonnegative, got rho={rho}, eta={eta}"
        )));
    }
    if growth.len() != years.len() {
        return Err(Error::Alignment(format!(
            "{} years but {} growth rates",
            years.len(),
            growth.len()
        )));
    }
    let rates: Vec<f64> = match population {
        PopulationTreatment::Embodied => growth.iter().map(|g| rho + eta * g).collect(),
        PopulationTreatment::Added(n) => {
            if n.len() != growth.len() {
                return Err(Error::Alignment(format!(
                    "{} growth rates but {} population growth rates",
                    growth.len(),
                    n.len()
                )));
            }
            growth.iter().zip(n).map(|(g, n)| rho + eta * g + n).collect()
        }
    };
    DiscountSchedule::from_forward_rates(years.to_vec(), rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn years(n: usize) -> Vec<i32> {
        (0..n as i32).collect()
    }

    #[test]
    fn no_discounting() {
        let s = ramsey_schedule(&years(50), 0.0, 0.0, &[0.03; 50], PopulationTreatment::Embodied)
            .unwrap();
        assert!(s.factors.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn pure_time_preference() {
        let s = ramsey_schedule(&years(5), 0.04, 0.0, &[0.5; 5], PopulationTreatment::Embodied)
            .unwrap();
        assert_eq!(s.factors[0], 1.0);
        assert!((s.factors[1] - 0.96154).abs() < 1e-5);
    }

    #[test]
    fn ramsey_rule() {
        let s = ramsey_schedule(&years(10), 0.01, 1.0, &[0.02; 10], PopulationTreatment::Embodied)
            .unwrap();
        assert!(s.rates.iter().all(|&r| (r - 0.03).abs() < 1e-15));
        assert!((s.annualized_rate(9) - 0.03).abs() < 1e-12);
    }

    #[test]
    fn population_growth_added_only_when_asked() {
        let g = [0.02; 4];
        let n = [0.01; 4];
        let a = ramsey_schedule(&years(4), 0.01, 1.0, &g, PopulationTreatment::Embodied).unwrap();
        let b = ramsey_schedule(&years(4), 0.01, 1.0, &g, PopulationTreatment::Added(&n)).unwrap();
        assert!((a.rates[0] - 0.03).abs() < 1e-15);
        assert!((b.rates[0] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rate_at_or_below_minus_one_rejected() {
        let r = ramsey_schedule(&years(3), 0.0, 2.0, &[0.1, -0.6, 0.1], PopulationTreatment::Embodied);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(ramsey_schedule(&years(1), -0.01, 1.0, &[0.0], PopulationTreatment::Embodied).is_err());
    }

    #[test]
    fn nonincreasing_for_nonnegative_rates() {
        let g: Vec<f64> = (0..100).map(|i| 0.001 * (i % 7) as f64).collect();
        let s = ramsey_schedule(&years(100), 0.015, 1.3, &g, PopulationTreatment::Embodied).unwrap();
        assert!(s.factors.windows(2).all(|w| w[1] <= w[0]));
    }
}
