use super::ramsey::{DiscountSchedule, RateConvention};
use crate::error::{Error, Result};

/// Certainty-equivalent schedule of a weighted set of schedules.
///
/// The factor is the weighted mean `D*(t) = sum_i w_i D_i(t)`; the rate is
/// annualized, `r*(t) = D*(t)^(-1/t) - 1`, and `r*(0)` is the weighted mean
/// of the members' first-year rates. Weights are normalized internally.
pub fn certainty_equivalent_rate(members: &[(f64, &DiscountSchedule)]) -> Result<DiscountSchedule> {
    let (_, first) = members
        .first()
        .ok_or_else(|| Error::Empty("certainty-equivalent rate of an empty set".into()))?;
    let len = first.len();
    if len == 0 {
        return Err(Error::Empty("schedules have no years".into()));
    }
    if let Some((w, _)) = members.iter().find(|(w, _)| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("member weight must be positive, found {w}")));
    }
    if members.iter().any(|(_, s)| s.len() != len) {
        return Err(Error::Alignment("schedules differ in length".into()));
    }
    let total: f64 = members.iter().map(|(w, _)| w).sum();

    let mut factors = vec![0.0; len];
    for (w, s) in members {
        let share = w / total;
        for (acc, d) in factors.iter_mut().zip(&s.factors) {
            *acc += share * d;
        }
    }
    let first_rate: f64 = members.iter().map(|(w, s)| w / total * s.rates[0]).sum();
    let rates: Vec<f64> = factors
        .iter()
        .enumerate()
        .map(|(t, d)| {
            if t == 0 {
                first_rate
            } else {
                d.powf(-1.0 / t as f64) - 1.0
            }
        })
        .collect();
    Ok(DiscountSchedule {
        years: first.years.clone(),
        factors,
        rates,
        convention: RateConvention::Annualized,
    })
}
