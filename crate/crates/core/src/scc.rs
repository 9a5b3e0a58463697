//! Net present value of a marginal damage path under individual Ramsey
//! discounting, and the premium of preference heterogeneity.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iam::MarginalDamagePath;
use crate::preferences::{Gender, PreferenceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccResult {
    /// Respondent key: row position in the preference file.
    pub key: usize,
    pub country: String,
    pub gender: Gender,
    pub age: Option<f64>,
    pub rho: f64,
    pub eta: f64,
    /// 2010 USD per tC.
    pub scc: f64,
    pub weight: f64,
}

/// Social cost of carbon (USD/tC) for one `(rho, eta)` pair.
///
/// Years from the pulse onward are discounted with
/// `D(k) = prod_{s<k} (1 + rho + eta g(pulse + s))^-1`, summed in year order.
pub fn scc_for_preferences(mdp: &MarginalDamagePath, rho: f64, eta: f64, growth: &[f64]) -> Result<f64> {
    if growth.len() != mdp.delta_damage.len() {
        return Err(Error::Alignment(format!(
            "damage path has {} years, growth path {}",
            mdp.delta_damage.len(),
            growth.len()
        )));
    }
    if !(rho >= 0.0) || !(eta >= 0.0) {
        return Err(Error::Domain(format!(
            "rho and eta must be nonnegative, got rho={rho}, eta={eta}"
        )));
    }
    if !(mdp.pulse_size > 0.0) {
        return Err(Error::Domain("pulse size must be positive".into()));
    }
    let start = mdp.pulse_index;
    let mut factor = 1.0;
    let mut npv = 0.0;
    for (dd, g) in mdp.delta_damage[start..].iter().zip(&growth[start..]) {
        npv += factor * dd;
        let gross = 1.0 + rho + eta * g;
        if !(gross > 0.0) {
            return Err(Error::Domain(format!(
                "discount rate {} <= -1 (rho={rho}, eta={eta}, g={g})",
                gross - 1.0
            )));
        }
        factor /= gross;
    }
    Ok(npv / mdp.pulse_size)
}

fn scc_for_record(mdp: &MarginalDamagePath, r: &PreferenceRecord, growth: &[f64]) -> Result<SccResult> {
    let (rho, eta) = match (r.rho, r.eta) {
        (Some(rho), Some(eta)) => (rho, eta),
        _ => {
            return Err(Error::Domain(format!(
                "record {} has not been calibrated",
                r.row
            )))
        }
    };
    Ok(SccResult {
        key: r.row,
        country: r.country.clone(),
        gender: r.gender,
        age: r.age,
        rho,
        eta,
        scc: scc_for_preferences(mdp, rho, eta, growth)?,
        weight: r.weight,
    })
}

/// One result per record, in input order. Each record is evaluated
/// independently, so the parallel output is bitwise equal to
/// [`batch_scc_serial`].
pub fn batch_scc(mdp: &MarginalDamagePath, records: &[PreferenceRecord], growth: &[f64]) -> Vec<Result<SccResult>> {
    records
        .par_iter()
        .map(|r| scc_for_record(mdp, r, growth))
        .collect()
}

pub fn batch_scc_serial(mdp: &MarginalDamagePath, records: &[PreferenceRecord], growth: &[f64]) -> Vec<Result<SccResult>> {
    records.iter().map(|r| scc_for_record(mdp, r, growth)).collect()
}

/// Splits batch output into successes and `(record position, error)` pairs.
pub fn partition_results(batch: Vec<Result<SccResult>>) -> (Vec<SccResult>, Vec<(usize, Error)>) {
    let mut ok = Vec::with_capacity(batch.len());
    let mut failed = Vec::new();
    for (i, r) in batch.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((i, e)),
        }
    }
    (ok, failed)
}

/// Weighted mean SCC of a set of results.
pub fn mean_scc(results: &[SccResult]) -> Option<f64> {
    let w: f64 = results.iter().map(|r| r.weight).sum();
    (w > 0.0).then(|| results.iter().map(|r| r.weight * r.scc).sum::<f64>() / w)
}

/// Weighted mean `(rho, eta)` of a set of results.
pub fn mean_preferences(results: &[SccResult]) -> Option<(f64, f64)> {
    let w: f64 = results.iter().map(|r| r.weight).sum();
    (w > 0.0).then(|| {
        (
            results.iter().map(|r| r.weight * r.rho).sum::<f64>() / w,
            results.iter().map(|r| r.weight * r.eta).sum::<f64>() / w,
        )
    })
}

/// Weighted mean of individual SCCs minus the SCC at `(ref_rho, ref_eta)`.
pub fn weitzman_premium(
    results: &[SccResult],
    ref_rho: f64,
    ref_eta: f64,
    mdp: &MarginalDamagePath,
    growth: &[f64],
) -> Result<f64> {
    let mean = mean_scc(results).ok_or_else(|| Error::Empty("no SCC results".into()))?;
    Ok(mean - scc_for_preferences(mdp, ref_rho, ref_eta, growth)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumSummary {
    pub ref_rho: f64,
    pub ref_eta: f64,
    /// SCC at mean preferences.
    pub ref_scc: f64,
    /// Weighted mean of individual SCCs.
    pub mean_scc: f64,
    pub premium: f64,
    /// `mean_scc / ref_scc`; NaN unless `ref_scc > 0`.
    pub ratio: f64,
}

/// Premium with the reference at the weighted mean calibrated preferences.
pub fn premium_summary(results: &[SccResult], mdp: &MarginalDamagePath, growth: &[f64]) -> Result<PremiumSummary> {
    let (ref_rho, ref_eta) =
        mean_preferences(results).ok_or_else(|| Error::Empty("no SCC results".into()))?;
    let ref_scc = scc_for_preferences(mdp, ref_rho, ref_eta, growth)?;
    let mean = mean_scc(results).unwrap();
    Ok(PremiumSummary {
        ref_rho,
        ref_eta,
        ref_scc,
        mean_scc: mean,
        premium: mean - ref_scc,
        ratio: if ref_scc > 0.0 { mean / ref_scc } else { f64::NAN },
    })
}

pub fn write_results(results: &[SccResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["key", "country", "gender", "age", "rho", "eta", "scc", "weight"])?;
    for r in results {
        w.write_record([
            r.key.to_string(),
            r.country.clone(),
            r.gender.to_string(),
            r.age.map(|a| a.to_string()).unwrap_or_default(),
            r.rho.to_string(),
            r.eta.to_string(),
            r.scc.to_string(),
            r.weight.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iam::DamageKind;

    pub fn flat_path(n: usize, pulse_index: usize, m: f64) -> MarginalDamagePath {
        let mut dd = vec![0.0; n];
        for v in &mut dd[pulse_index..] {
            *v = m;
        }
        MarginalDamagePath {
            scenario_id: "flat".into(),
            damage_kind: DamageKind::Dice2023,
            income_elasticity: 0.0,
            years: (2020..2020 + n as i32).collect(),
            delta_damage: dd,
            pulse_size: 1e9,
            pulse_year: 2020 + pulse_index as i32,
            pulse_index,
        }
    }

    fn record(row: usize, rho: f64, eta: f64, w: f64) -> PreferenceRecord {
        PreferenceRecord {
            row,
            country: "NLD".into(),
            time_index: 0.0,
            risk_index: 0.0,
            gender: Gender::Female,
            age: Some(30.0),
            weight: w,
            rho: Some(rho),
            eta: Some(eta),
        }
    }

    #[test]
    fn geometric_series_closed_form() {
        let n = 281;
        let m = 3.0e9;
        let mdp = flat_path(n, 0, m);
        let g = vec![0.0; n];
        for rho in [0.02, 0.05, 0.1] {
            let scc = scc_for_preferences(&mdp, rho, 0.0, &g).unwrap();
            let q = 1.0 / (1.0 + rho);
            let exact = m / 1e9 * (1.0 - q.powi(n as i32)) / (1.0 - q);
            assert!((scc / exact - 1.0).abs() < 1e-12, "rho {rho}: {scc} vs {exact}");
            let limit = m / (1e9 * rho) * (1.0 + rho);
            assert!(scc < limit && scc / limit > 0.99);
        }
    }

    #[test]
    fn very_impatient_sees_first_year_only() {
        let mut mdp = flat_path(100, 0, 1.0e9);
        mdp.delta_damage[0] = 5.0e9;
        let scc = scc_for_preferences(&mdp, 10.0, 0.0, &vec![0.0; 100]).unwrap();
        assert!((scc - 5.0).abs() < 0.11);
    }

    #[test]
    fn toy_pair_hand_computed() {
        // damage 1e9 USD in each of years 0..=2 after the pulse
        let mut mdp = flat_path(3, 0, 1.0e9);
        mdp.pulse_size = 1e9;
        let g = vec![0.0; 3];
        let recs = vec![record(0, 0.0, 0.0, 1.0), record(1, 0.1, 0.0, 1.0)];
        let out: Vec<f64> = batch_scc(&mdp, &recs, &g).into_iter().map(|r| r.unwrap().scc).collect();
        assert!((out[0] - 3.0).abs() < 1e-12);
        assert!((out[1] - (1.0 + 1.0 / 1.1 + 1.0 / 1.21)).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_alignment_error() {
        let mdp = flat_path(10, 0, 1.0);
        assert!(matches!(
            scc_for_preferences(&mdp, 0.01, 1.0, &[0.0; 9]),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn per_record_errors_do_not_abort_batch() {
        let mdp = flat_path(10, 0, 1.0e9);
        let g = vec![-0.6; 10];
        let recs = vec![record(0, 0.01, 0.0, 1.0), record(1, 0.01, 2.0, 1.0)];
        let out = batch_scc(&mdp, &recs, &g);
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::Domain(_))));
        let mut uncal = record(2, 0.0, 0.0, 1.0);
        uncal.rho = None;
        assert!(batch_scc(&mdp, &[uncal], &[0.0; 10])[0].is_err());
    }

    #[test]
    fn homogeneous_population_has_no_premium() {
        let mdp = flat_path(120, 0, 2.0e9);
        let g = vec![0.015; 120];
        let recs: Vec<_> = (0..5).map(|i| record(i, 0.02, 1.5, 1.0 + i as f64)).collect();
        let (ok, _) = partition_results(batch_scc(&mdp, &recs, &g));
        assert!(ok.windows(2).all(|w| w[0].scc == w[1].scc));
        let w = weitzman_premium(&ok, 0.02, 1.5, &mdp, &g).unwrap();
        assert!(w.abs() < 1e-9);
    }

    #[test]
    fn heterogeneity_raises_mean_scc() {
        let mdp = flat_path(200, 0, 2.0e9);
        let g = vec![0.02; 200];
        let recs = vec![record(0, 0.0, 0.5, 1.0), record(1, 0.06, 3.0, 1.0)];
        let (ok, _) = partition_results(batch_scc(&mdp, &recs, &g));
        let s = premium_summary(&ok, &mdp, &g).unwrap();
        assert!((s.ref_rho - 0.03).abs() < 1e-15);
        assert!(s.premium > 0.0);
        assert_eq!(s.premium, s.mean_scc - s.ref_scc);
    }

    proptest::proptest! {
        #[test]
        fn scc_decreases_in_rho_and_eta(
            rho in 0.0f64..0.08,
            eta in 0.0f64..4.0,
            d_rho in 1e-4f64..0.02,
            d_eta in 1e-3f64..0.5,
            g in 0.0f64..0.04,
        ) {
            let mdp = flat_path(150, 5, 1.0e9);
            let gs = vec![g; 150];
            let base = scc_for_preferences(&mdp, rho, eta, &gs).unwrap();
            let more_rho = scc_for_preferences(&mdp, rho + d_rho, eta, &gs).unwrap();
            let more_eta = scc_for_preferences(&mdp, rho, eta + d_eta, &gs).unwrap();
            proptest::prop_assert!(more_rho <= base);
            proptest::prop_assert!(more_eta <= base + 1e-12 * base.abs());
        }

        #[test]
        fn parallel_equals_serial(prefs in proptest::collection::vec((0.0f64..0.1, 0.0f64..4.0, 0.1f64..5.0), 1..40)) {
            let mdp = flat_path(60, 0, 1.5e9);
            let gs: Vec<f64> = (0..60).map(|i| 0.01 + 1e-4 * i as f64).collect();
            let recs: Vec<_> = prefs.iter().enumerate().map(|(i, &(r, e, w))| record(i, r, e, w)).collect();
            let a: Vec<_> = batch_scc(&mdp, &recs, &gs).into_iter().map(|r| r.unwrap()).collect();
            let b: Vec<_> = batch_scc_serial(&mdp, &recs, &gs).into_iter().map(|r| r.unwrap()).collect();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
