//! Run matrix over scenarios, damage kinds, income elasticities and
//! calibration variants, with a shared marginal-damage cache.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iam::{marginal_damage_path, DamageKind, IamConfig, MarginalDamagePath};
use crate::preferences::{CalibrationVariant, PreferenceRecord};
use crate::scc::{self, partition_results};
use crate::scenario::{growth_path, Scenario};

/// Income elasticities of damages: a small positive value, zero, and half,
/// one and two times the central -0.36.
pub const ELASTICITY_GRID: [f64; 5] = [0.1, 0.0, -0.18, -0.36, -0.72];

pub type ScenarioLoader<'a> = dyn Fn(&str) -> Result<Scenario> + Sync + 'a;

/// Everything needed to turn a (scenario, damage kind, elasticity) triple
/// into a marginal damage path.
pub struct ModelSetup<'a> {
    pub iam: &'a IamConfig,
    /// Returns the scenario already restricted to the model horizon.
    pub scenarios: &'a ScenarioLoader<'a>,
    /// tC
    pub pulse_size: f64,
    pub pulse_year: i32,
}

/// A marginal damage path and the consumption growth path on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageContext {
    pub mdp: MarginalDamagePath,
    pub growth: Vec<f64>,
}

impl ModelSetup<'_> {
    pub fn damage_context(&self, scenario: &str, kind: DamageKind, elasticity: f64) -> Result<DamageContext> {
        let s = (self.scenarios)(scenario)?;
        let spec = self.iam.damage_spec(kind, elasticity)?;
        let mdp = marginal_damage_path(
            &s,
            &self.iam.carbon_cycle,
            &self.iam.climate,
            &spec,
            self.pulse_size,
            self.pulse_year,
        )?;
        Ok(DamageContext {
            mdp,
            growth: growth_path(&s),
        })
    }
}

type MdpKey = (String, DamageKind, u64);

/// Marginal damage paths keyed by (scenario, damage kind, elasticity).
/// Many readers, one writer; a path computed twice under contention is
/// identical, so either copy may be kept.
#[derive(Default)]
pub struct MdpCache {
    map: RwLock<HashMap<MdpKey, Arc<DamageContext>>>,
}

impl MdpCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        setup: &ModelSetup<'_>,
        scenario: &str,
        kind: DamageKind,
        elasticity: f64,
    ) -> Result<Arc<DamageContext>> {
        let key = (scenario.to_owned(), kind, elasticity.to_bits());
        if let Some(hit) = self.map.read().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let ctx = Arc::new(setup.damage_context(scenario, kind, elasticity)?);
        let mut map = self.map.write().unwrap();
        Ok(Arc::clone(map.entry(key).or_insert(ctx)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub scenario: String,
    pub damage: DamageKind,
    pub income_elasticity: f64,
    pub calibration: CalibrationVariant,
}

impl CellSpec {
    pub fn id(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.scenario, self.damage, self.income_elasticity, self.calibration
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub scenarios: Vec<String>,
    pub damages: Vec<DamageKind>,
    pub elasticities: Vec<f64>,
    pub calibrations: Vec<CalibrationVariant>,
}

impl Axes {
    /// All combinations, scenario outermost and calibration innermost.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for s in &self.scenarios {
            for &d in &self.damages {
                for &e in &self.elasticities {
                    for &c in &self.calibrations {
                        out.push(CellSpec {
                            scenario: s.clone(),
                            damage: d,
                            income_elasticity: e,
                            calibration: c,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub id: String,
    pub scenario: String,
    pub damage: DamageKind,
    pub income_elasticity: f64,
    pub calibration: CalibrationVariant,
    pub respondents: usize,
    pub failed_records: usize,
    pub ref_scc: Option<f64>,
    pub mean_scc: Option<f64>,
    pub premium: Option<f64>,
    /// `mean_scc / ref_scc` when `ref_scc > 0`.
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

impl RunCell {
    fn new(spec: &CellSpec) -> Self {
        Self {
            id: spec.id(),
            scenario: spec.scenario.clone(),
            damage: spec.damage,
            income_elasticity: spec.income_elasticity,
            calibration: spec.calibration,
            respondents: 0,
            failed_records: 0,
            ref_scc: None,
            mean_scc: None,
            premium: None,
            ratio: None,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Calibrated respondents per variant; a variant whose calibration failed
/// carries the error message instead.
pub type Populations = BTreeMap<CalibrationVariant, std::result::Result<Vec<PreferenceRecord>, String>>;

#[derive(Debug, Clone, Default)]
pub struct MatrixOptions {
    pub use_cache: bool,
    /// JSON-lines file of finished cells. Successful cells found there are
    /// not recomputed; new cells are appended as they finish.
    pub checkpoint: Option<std::path::PathBuf>,
}

pub fn run_cell(
    spec: &CellSpec,
    setup: &ModelSetup<'_>,
    populations: &Populations,
    cache: Option<&MdpCache>,
) -> RunCell {
    let mut cell = RunCell::new(spec);
    let outcome = (|| -> Result<()> {
        let records = match populations.get(&spec.calibration) {
            Some(Ok(r)) => r,
            Some(Err(msg)) => return Err(Error::Calibration(msg.clone())),
            None => {
                return Err(Error::Config(format!(
                    "calibration variant {} not prepared",
                    spec.calibration
                )))
            }
        };
        let ctx = match cache {
            Some(c) => c.get_or_compute(setup, &spec.scenario, spec.damage, spec.income_elasticity)?,
            None => Arc::new(setup.damage_context(&spec.scenario, spec.damage, spec.income_elasticity)?),
        };
        let (ok, failed) = partition_results(scc::batch_scc(&ctx.mdp, records, &ctx.growth));
        cell.respondents = ok.len();
        cell.failed_records = failed.len();
        let s = scc::premium_summary(&ok, &ctx.mdp, &ctx.growth)?;
        cell.ref_scc = Some(s.ref_scc);
        cell.mean_scc = Some(s.mean_scc);
        cell.premium = Some(s.premium);
        cell.ratio = (s.ref_scc > 0.0).then_some(s.ratio);
        Ok(())
    })();
    if let Err(e) = outcome {
        warn!("cell {} failed: {e}", cell.id);
        cell.error = Some(e.to_string());
    }
    cell
}

/// Successful cells stored in a checkpoint file, keyed by cell id.
pub fn read_checkpoint(path: &Path) -> Result<BTreeMap<String, RunCell>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunCell>(&line) {
            Ok(cell) if cell.is_ok() => {
                out.insert(cell.id.clone(), cell);
            }
            Ok(_) => {}
            // a torn final line from an interrupted run
            Err(e) => warn!("skipping unreadable checkpoint line: {e}"),
        }
    }
    Ok(out)
}

/// Runs every cell of `axes` in parallel. Output follows axis order
/// regardless of completion order; failed cells carry their error.
pub fn run_matrix(
    axes: &Axes,
    setup: &ModelSetup<'_>,
    populations: &Populations,
    opts: &MatrixOptions,
) -> Result<Vec<RunCell>> {
    let specs = axes.cells();
    let done = match &opts.checkpoint {
        Some(p) => read_checkpoint(p)?,
        None => BTreeMap::new(),
    };
    if !done.is_empty() {
        info!("resuming: {} cells found in checkpoint", done.len());
    }
    let sink = match &opts.checkpoint {
        Some(p) => Some(Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?,
        )),
        None => None,
    };
    let cache = opts.use_cache.then(MdpCache::new);

    let cells: Vec<Result<RunCell>> = specs
        .par_iter()
        .map(|spec| {
            if let Some(c) = done.get(&spec.id()) {
                return Ok(c.clone());
            }
            let cell = run_cell(spec, setup, populations, cache.as_ref());
            if let (Some(sink), Some(path)) = (&sink, &opts.checkpoint) {
                let line = serde_json::to_string(&cell)?;
                let mut f = sink.lock().unwrap();
                writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
            }
            Ok(cell)
        })
        .collect();
    cells.into_iter().collect()
}

pub fn write_matrix_csv(cells: &[RunCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "id",
        "scenario",
        "damage",
        "income_elasticity",
        "calibration",
        "respondents",
        "failed_records",
        "ref_scc",
        "mean_scc",
        "premium",
        "ratio",
        "error",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cells {
        w.write_record([
            c.id.clone(),
            c.scenario.clone(),
            c.damage.to_string(),
            c.income_elasticity.to_string(),
            c.calibration.to_string(),
            c.respondents.to_string(),
            c.failed_records.to_string(),
            opt(c.ref_scc),
            opt(c.mean_scc),
            opt(c.premium),
            opt(c.ratio),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
