//! Climate damage functions, expressed as a fraction of output lost.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageKind {
    Dice2023,
    HowardSterner,
    TolA,
    TolB,
    TolC,
    TolD,
}

impl DamageKind {
    pub const ALL: [DamageKind; 6] = [
        DamageKind::Dice2023,
        DamageKind::HowardSterner,
        DamageKind::TolA,
        DamageKind::TolB,
        DamageKind::TolC,
        DamageKind::TolD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DamageKind::Dice2023 => "dice2023",
            DamageKind::HowardSterner => "howard_sterner",
            DamageKind::TolA => "tol_a",
            DamageKind::TolB => "tol_b",
            DamageKind::TolC => "tol_c",
            DamageKind::TolD => "tol_d",
        }
    }
}

impl fmt::Display for DamageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DamageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DamageKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown damage kind {s:?}")))
    }
}

/// Base damage function `D(T)`; positive values are losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DamageFunction {
    /// `D(T) = sum_k c_k T^(k+1)`, so `coefficients[0]` is the linear term.
    Polynomial { coefficients: Vec<f64> },
    /// Slope `slope_low` up to `breakpoint` degC, `slope_high` beyond.
    /// A negative `slope_low` gives net benefits from mild warming.
    Bilinear {
        slope_low: f64,
        breakpoint: f64,
        slope_high: f64,
    },
}

impl DamageFunction {
    pub fn eval(&self, temp: f64) -> f64 {
        match self {
            DamageFunction::Polynomial { coefficients } => coefficients
                .iter()
                .rev()
                .fold(0.0, |acc, c| (acc + c) * temp),
            DamageFunction::Bilinear {
                slope_low,
                breakpoint,
                slope_high,
            } => {
                if temp <= *breakpoint {
                    slope_low * temp
                } else {
                    slope_low * breakpoint + slope_high * (temp - breakpoint)
                }
            }
        }
    }

    /// True when `D` is nondecreasing for nonnegative temperatures.
    pub fn is_nondecreasing_for_warming(&self) -> bool {
        match self {
            DamageFunction::Polynomial { coefficients } => coefficients.iter().all(|&c| c >= 0.0),
            DamageFunction::Bilinear {
                slope_low,
                slope_high,
                ..
            } => *slope_low >= 0.0 && *slope_high >= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    pub kind: DamageKind,
    pub function: DamageFunction,
    /// Exponent on per-capita income relative to the base year.
    pub income_elasticity: f64,
}

/// Fraction of output lost at temperature `temp` when per-capita income is
/// `income_ratio` times its base-year level: `D(T) * income_ratio^elasticity`.
pub fn damage_fraction(spec: &DamageSpec, temp: f64, income_ratio: f64) -> Result<f64> {
    if !(income_ratio > 0.0) {
        return Err(Error::Domain(format!(
            "income ratio must be positive, found {income_ratio}"
        )));
    }
    Ok(spec.function.eval(temp) * income_ratio.powf(spec.income_elasticity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> DamageSpec {
        DamageSpec {
            kind: DamageKind::Dice2023,
            function: DamageFunction::Polynomial {
                coefficients: vec![0.0, 0.003467],
            },
            income_elasticity: -0.36,
        }
    }

    fn bilinear() -> DamageSpec {
        DamageSpec {
            kind: DamageKind::TolC,
            function: DamageFunction::Bilinear {
                slope_low: -0.005,
                breakpoint: 1.8,
                slope_high: 0.012,
            },
            income_elasticity: 0.0,
        }
    }

    #[test]
    fn zero_warming_zero_damage() {
        for spec in [quad(), bilinear()] {
            assert_eq!(damage_fraction(&spec, 0.0, 1.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn polynomial_evaluation() {
        let f = DamageFunction::Polynomial {
            coefficients: vec![0.01, 0.002, 0.0001],
        };
        let t = 2.5f64;
        let direct = 0.01 * t + 0.002 * t * t + 0.0001 * t.powi(3);
        assert!((f.eval(t) - direct).abs() < 1e-15);
    }

    #[test]
    fn zero_elasticity_ignores_income() {
        let mut spec = quad();
        spec.income_elasticity = 0.0;
        let a = damage_fraction(&spec, 3.0, 1.0).unwrap();
        let b = damage_fraction(&spec, 3.0, 4.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn elasticity_scales_by_power_of_income() {
        let spec = quad();
        let base = spec.function.eval(3.0);
        let scaled = damage_fraction(&spec, 3.0, 2.0).unwrap();
        let factor = scaled / base;
        assert!((factor - 2f64.powf(-0.36)).abs() < 1e-12);
        assert!((factor - 0.77917).abs() < 5e-5);
    }

    #[test]
    fn bilinear_has_benefits_below_breakpoint() {
        let spec = bilinear();
        assert!(damage_fraction(&spec, 1.0, 1.0).unwrap() < 0.0);
        assert!(damage_fraction(&spec, 5.0, 1.0).unwrap() > 0.0);
        // continuous at the breakpoint
        let f = &spec.function;
        assert!((f.eval(1.8 - 1e-9) - f.eval(1.8 + 1e-9)).abs() < 1e-9);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in DamageKind::ALL {
            assert_eq!(k.name().parse::<DamageKind>().unwrap(), k);
        }
        assert!(matches!("fund".parse::<DamageKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn nonpositive_income_ratio_rejected() {
        assert!(damage_fraction(&quad(), 1.0, 0.0).is_err());
    }
}
