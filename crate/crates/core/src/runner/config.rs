use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineParams, HoldingTimeMode};
use crate::error::{Error, Result};
use crate::extrapolate::DEFAULT_GRID_DT;
use crate::lattice::{BoundaryPolicy, LatticePoint, LatticeWindow};
use crate::medium::MediumSpec;
use crate::stats::DEFAULT_TRIM_FRACTION;

use super::registry::registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    /// Required for inline media; must match the registry model otherwise.
    pub dimension: Option<usize>,
    pub side: usize,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            dimension: None,
            side: 100,
            boundary_policy: BoundaryPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub kappa: f64,
    pub particle_cap: u32,
    pub holding_time_mode: HoldingTimeMode,
}

impl Default for EngineSection {
    fn default() -> Self {
        let p = EngineParams::default();
        EngineSection {
            kappa: p.kappa,
            particle_cap: p.particle_cap,
            holding_time_mode: p.holding_time_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtrapolateSection {
    pub grid_dt: f64,
}

impl Default for ExtrapolateSection {
    fn default() -> Self {
        ExtrapolateSection {
            grid_dt: DEFAULT_GRID_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Spacing of the moment time grid.
    pub grid_dt: f64,
    /// Highest quenched order `n` estimated.
    pub max_order: u32,
    /// Highest annealed power `p` estimated.
    pub max_power: u32,
    /// Exponent of `t` in the Lyapunov normalisation.
    pub beta: f64,
    pub trim_fraction: f64,
    /// Trailing share of the horizon used for Lyapunov slopes.
    pub lyapunov_window: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            grid_dt: 0.1,
            max_order: 2,
            max_power: 3,
            beta: 1.0,
            trim_fraction: DEFAULT_TRIM_FRACTION,
            lyapunov_window: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub dt: f64,
    /// Oracle window side; 41 in d = 1 and 21 in d = 3 when unset.
    pub window_side: Option<usize>,
    pub times: Vec<f64>,
    /// Replicates per medium for the engine mean.
    pub replicates: usize,
    /// Media compared (the first ones of the ensemble).
    pub media: usize,
    /// Particle cap for the engine runs; capped runs are extrapolated.
    pub particle_cap: u32,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            dt: 0.01,
            window_side: None,
            times: vec![1.0, 2.0, 5.0],
            replicates: 1000,
            media: 5,
            particle_cap: 100_000,
        }
    }
}

/// Full description of one experiment. Every key has a default except that
/// one of `model` and `medium` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Registry id in `1..=10`.
    pub model: Option<u32>,
    /// Inline medium, used when `model` is absent.
    pub medium: Option<MediumSpec>,
    pub lattice: LatticeSection,
    /// Start point of the single ancestor; the origin when unset.
    pub start: Option<LatticePoint>,
    pub engine: EngineSection,
    /// Replicates per medium.
    pub m: usize,
    /// Number of media.
    pub m1: usize,
    pub t_max: f64,
    pub snapshot_times: Vec<f64>,
    pub master_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub extrapolate: ExtrapolateSection,
    pub report: ReportSection,
    pub oracle: OracleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: None,
            medium: None,
            lattice: LatticeSection::default(),
            start: None,
            engine: EngineSection::default(),
            m: 200,
            m1: 50,
            t_max: 10.0,
            snapshot_times: vec![2.5, 10.0],
            master_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            extrapolate: ExtrapolateSection::default(),
            report: ReportSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

/// A configuration with the model looked up and defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedModel {
    pub label: String,
    pub window: LatticeWindow,
    pub medium: MediumSpec,
    pub start: LatticePoint,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for a registry model.
    pub fn for_model(model: u32) -> Self {
        ExperimentConfig {
            model: Some(model),
            ..ExperimentConfig::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            kappa: self.engine.kappa,
            t_max: self.t_max,
            particle_cap: self.engine.particle_cap,
            holding_time_mode: self.engine.holding_time_mode,
        }
    }

    /// Uniform report grid `t_i = T·i/n`, `n = round(T / grid_dt)`.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = (self.t_max / self.report.grid_dt).round().max(1.0) as usize;
        (0..=n).map(|i| self.t_max * i as f64 / n as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(config_err("m", "must be at least 1"));
        }
        if self.m1 == 0 {
            return Err(config_err("m1", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers", "must be at least 1"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(config_err(
                "t_max",
                format!("must be positive, got {}", self.t_max),
            ));
        }
        for (i, &t) in self.snapshot_times.iter().enumerate() {
            if !(0.0..=self.t_max).contains(&t) {
                return Err(config_err(
                    &format!("snapshot_times[{i}]"),
                    format!("{t} outside [0, {}]", self.t_max),
                ));
            }
        }
        if !(self.report.grid_dt > 0.0 && self.report.grid_dt <= self.t_max) {
            return Err(config_err("report.grid_dt", "must lie in (0, t_max]"));
        }
        if !(self.extrapolate.grid_dt > 0.0 && self.extrapolate.grid_dt.is_finite()) {
            return Err(config_err("extrapolate.grid_dt", "must be positive"));
        }
        if self.report.max_order == 0 || self.report.max_power == 0 {
            return Err(config_err(
                "report",
                "max_order and max_power must be at least 1",
            ));
        }
        if !(0.0..0.5).contains(&self.report.trim_fraction) {
            return Err(config_err("report.trim_fraction", "must lie in [0, 0.5)"));
        }
        if !(self.report.lyapunov_window > 0.0 && self.report.lyapunov_window <= 1.0) {
            return Err(config_err("report.lyapunov_window", "must lie in (0, 1]"));
        }
        if !(self.report.beta > 0.0 && self.report.beta.is_finite()) {
            return Err(config_err("report.beta", "must be positive"));
        }
        if self.oracle.times.is_empty()
            || self
                .oracle
                .times
                .iter()
                .any(|&t| !(t.is_finite() && t > 0.0))
        {
            return Err(config_err(
                "oracle.times",
                "need at least one finite positive time",
            ));
        }
        if self.oracle.replicates < 2 || self.oracle.media == 0 {
            return Err(config_err(
                "oracle",
                "need at least 2 replicates and 1 medium",
            ));
        }
        self.engine_params()
            .validate()
            .map_err(|e| config_err("engine", e.to_string()))?;
        self.resolve()?;
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedModel> {
        let (label, dimension, medium) = match (self.model, &self.medium) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "medium",
                    "give either `model` or `medium`, not both",
                ))
            }
            (None, None) => {
                return Err(config_err(
                    "model",
                    "one of `model` or `medium` is required",
                ))
            }
            (Some(id), None) => {
                let def = registry(id).map_err(|e| config_err("model", e.to_string()))?;
                if let Some(d) = self.lattice.dimension {
                    if d != def.dimension {
                        return Err(config_err(
                            "lattice.dimension",
                            format!("model {id} lives in d = {}, got {d}", def.dimension),
                        ));
                    }
                }
                (format!("{id}"), def.dimension, def.medium)
            }
            (None, Some(spec)) => {
                let d = self.lattice.dimension.ok_or_else(|| {
                    config_err("lattice.dimension", "required with an inline medium")
                })?;
                ("custom".to_string(), d, spec.clone())
            }
        };
        let window = LatticeWindow::new(dimension, self.lattice.side, self.lattice.boundary_policy)
            .map_err(|e| config_err("lattice", e.to_string()))?;
        medium
            .validate(&window)
            .map_err(|e| config_err("medium", e.to_string()))?;
        let start = self
            .start
            .clone()
            .unwrap_or_else(|| LatticePoint::origin(dimension));
        if !window.contains(&start) {
            return Err(config_err(
                "start",
                format!("{start} lies outside the window"),
            ));
        }
        Ok(ResolvedModel {
            label,
            window,
            medium,
            start,
        })
    }

    pub fn oracle_window_side(&self, dimension: usize) -> usize {
        self.oracle
            .window_side
            .unwrap_or(if dimension == 1 { 41 } else { 21 })
    }
}
