//! Deterministic climate-economy chain: carbon cycle, temperature, damages,
//! and the preference-independent marginal damage path of a carbon pulse.

pub mod carbon;
pub mod climate;
pub mod damage;
pub mod marginal;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use carbon::{concentration_path, CarbonCycleParams};
pub use climate::{temperature_path, ClimateParams};
pub use damage::{damage_fraction, DamageFunction, DamageKind, DamageSpec};
pub use marginal::{marginal_damage_path, simulate, ClimateRun, MarginalDamagePath, TONNES_PER_GT};

use crate::error::{Error, Result};

/// Carbon-cycle, climate and damage coefficient tables, as read from the
/// model parameter file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IamConfig {
    pub carbon_cycle: CarbonCycleParams,
    pub climate: ClimateParams,
    pub damages: BTreeMap<String, DamageFunction>,
}

impl IamConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: IamConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.carbon_cycle.validate()?;
        self.climate.validate()?;
        for name in self.damages.keys() {
            name.parse::<DamageKind>()?;
        }
        Ok(())
    }

    pub fn damage_spec(&self, kind: DamageKind, income_elasticity: f64) -> Result<DamageSpec> {
        let function = self
            .damages
            .get(kind.name())
            .cloned()
            .ok_or_else(|| Error::Config(format!("no coefficients for damage kind {kind}")))?;
        Ok(DamageSpec {
            kind,
            function,
            income_elasticity,
        })
    }
}
