//! JSON run configurations for the `bjj` command line tool.
//!
//! Model energies are in units of `J`, times in `1/J`. Trap and noise blocks
//! are SI as documented on [`TrapSpec`] and [`NoiseModel`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::lindblad::NoiseChannels;
use crate::model::ModelParams;
use crate::noise::{ChipConstants, NoiseModel};
use crate::trap::{GridSpec, TrapSpec};
use crate::{Error, Result};

/// Equally spaced output times `0, t_end/steps, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("time.t_end", "must be finite and > 0"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("time.steps", "must be >= 1"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        crate::lindblad::uniform_grid(self.t_end, self.steps)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Ground,
    /// `kT` in units of `J`.
    Thermal { kt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundConfig {
    pub model: ModelParams,
    /// Accepted for symmetry with `evolve`; not used.
    #[serde(default)]
    pub noise: NoiseChannels,
    /// Temperature of the thermal comparison state, `kT / J`.
    #[serde(default)]
    pub kt: f64,
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub noise: NoiseChannels,
    pub time: TimeGrid,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub initial: InitialState,
    /// Adds the single-particle `exp(-gamma t)` and linearized-rate columns.
    #[serde(default)]
    pub overlay: bool,
}

fn default_trajectories() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub noise: NoiseChannels,
    pub time: TimeGrid,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Bisection bracket for the `mu_par = V0` crossing (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySearch {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_boundary_tol")]
    pub tol_hz: f64,
}

fn default_boundary_tol() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base trap; `N` and `V0` are replaced by the sweep values.
    pub trap: TrapSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(rename = "N")]
    pub ns: Vec<usize>,
    #[serde(rename = "V0")]
    pub v0s: Vec<f64>,
    /// Also locate the validity boundary for every `N`.
    #[serde(default)]
    pub boundary: Option<BoundarySearch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default)]
    pub dephasing: Option<NoiseModel>,
    #[serde(default)]
    pub loss: Option<NoiseModel>,
    /// Supplies the mode densities and the well separation.
    #[serde(default)]
    pub trap: Option<TrapSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    /// Well separation (m) when no trap is given.
    #[serde(default)]
    pub d: Option<f64>,
    /// Tunneling `J / h` (Hz) for expressing rates in units of `J`; taken
    /// from the trap extraction when a trap is given.
    #[serde(default)]
    pub j_hz: Option<f64>,
}

/// Data drawn from `tau = z0^2 / c_total` when no data file is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLifetimes {
    /// um^2/s
    pub c_total: f64,
    pub z0_um: Vec<f64>,
    #[serde(default)]
    pub rel_sigma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeConfig {
    #[serde(default)]
    pub chip: ChipConstants,
    #[serde(default)]
    pub synthetic: Option<SyntheticLifetimes>,
}

impl GroundConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| prefixed("model", e))?;
        self.noise.validate().map_err(|e| prefixed("noise", e))?;
        if !(self.kt.is_finite() && self.kt >= 0.0) {
            return Err(Error::invalid("kt", "must be finite and >= 0"));
        }
        Ok(())
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| prefixed("model", e))?;
        self.noise.validate().map_err(|e| prefixed("noise", e))?;
        self.time.validate()?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be finite and > 0"));
        }
        if let InitialState::Thermal { kt } = self.initial {
            if !(kt.is_finite() && kt >= 0.0) {
                return Err(Error::invalid("initial.kt", "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

impl SemiclassicalConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| prefixed("model", e))?;
        self.noise.validate().map_err(|e| prefixed("noise", e))?;
        self.time.validate()?;
        if self.trajectories < 2 {
            return Err(Error::invalid("trajectories", "must be >= 2"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid("dt", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.trap.validate().map_err(|e| prefixed("trap", e))?;
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::invalid("N", "must be a non-empty list of positive atom numbers"));
        }
        if self.v0s.is_empty() || self.v0s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("V0", "must be a non-empty list of barrier heights >= 0"));
        }
        if let Some(b) = self.boundary {
            if !(b.lo >= 0.0 && b.hi > b.lo && b.tol_hz > 0.0) {
                return Err(Error::invalid("boundary", "need 0 <= lo < hi and tol_hz > 0"));
            }
        }
        Ok(())
    }
}

impl RatesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dephasing.is_none() && self.loss.is_none() {
            return Err(Error::invalid("dephasing", "give a dephasing or a loss model"));
        }
        if let Some(m) = &self.dephasing {
            m.validate().map_err(|e| prefixed("dephasing", e))?;
            if matches!(m, NoiseModel::JohnsonExpCorr { .. }) && self.trap.is_none() {
                return Err(Error::invalid("trap", "johnson_exp_corr needs the trap mode densities"));
            }
            if self.trap.is_none() && self.d.is_none() {
                return Err(Error::invalid("d", "well separation required without a trap"));
            }
        }
        if let Some(m) = &self.loss {
            m.validate().map_err(|e| prefixed("loss", e))?;
        }
        if let Some(t) = &self.trap {
            t.validate().map_err(|e| prefixed("trap", e))?;
        }
        if let Some(d) = self.d {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("d", "must be > 0"));
            }
        }
        if let Some(j) = self.j_hz {
            if !(j.is_finite() && j > 0.0) {
                return Err(Error::invalid("j_hz", "must be > 0"));
            }
        }
        Ok(())
    }
}

impl LifetimeConfig {
    pub fn validate(&self) -> Result<()> {
        self.chip.validate().map_err(|e| prefixed("chip", e))?;
        if let Some(s) = &self.synthetic {
            if !(s.c_total.is_finite() && s.c_total > 0.0) {
                return Err(Error::invalid("synthetic.c_total", "must be > 0"));
            }
            if s.z0_um.len() < 3 || s.z0_um.iter().any(|z| !(*z > 0.0)) {
                return Err(Error::invalid("synthetic.z0_um", "need at least 3 positive distances"));
            }
            if !(s.rel_sigma.is_finite() && s.rel_sigma >= 0.0) {
                return Err(Error::invalid("synthetic.rel_sigma", "must be >= 0"));
            }
        }
        Ok(())
    }
}

fn prefixed(block: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{block}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Reads and parses a config; serde reports unknown keys with line and column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> std::result::Result<T, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_config_minimal() {
        let c: GroundConfig = parse(r#"{"model": {"N": 50, "U": 0.25}}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.model.j, 1.0);
        assert_eq!(c.noise, NoiseChannels::default());
        let c: GroundConfig = parse(r#"{"model": {"N": 50, "U": 0.25}, "noise": {}}"#).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let e = parse::<GroundConfig>("{\n  \"model\": {\"N\": 5, \"U\": 0},\n  \"colour\": 1\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("colour") && msg.contains("line 3"), "{msg}");
        assert!(parse::<EvolveConfig>(r#"{"model":{"N":5,"U":0,"W":1},"time":{"t_end":1,"steps":2}}"#).is_err());
    }

    #[test]
    fn negative_u_names_field() {
        let c: GroundConfig = parse(r#"{"model": {"N": 50, "U": -0.1}}"#).unwrap();
        match c.validate().unwrap_err() {
            Error::InvalidParameter { field, .. } => assert_eq!(field, "model.U"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn evolve_defaults() {
        let c: EvolveConfig = parse(r#"{"model":{"N":10,"U":0.1},"time":{"t_end":10,"steps":100}}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.tol, 1e-9);
        assert_eq!(c.initial, InitialState::Ground);
        assert!(!c.overlay);
        assert_eq!(c.time.points().len(), 101);
        let t: EvolveConfig = parse(
            r#"{"model":{"N":10,"U":0.1},"time":{"t_end":1,"steps":1},"initial":{"kind":"thermal","kt":0.5}}"#,
        )
        .unwrap();
        assert_eq!(t.initial, InitialState::Thermal { kt: 0.5 });
    }

    #[test]
    fn rates_requires_a_model() {
        let c: RatesConfig = parse("{}").unwrap();
        assert!(c.validate().is_err());
        let c: RatesConfig = parse(r#"{"dephasing":{"kind":"technical_slope","eta":1e-50},"d":5e-6}"#).unwrap();
        c.validate().unwrap();
        let c: RatesConfig = parse(r#"{"dephasing":{"kind":"johnson_exp_corr","b_pp":1e-24,"lambda_c":1e-6},"d":5e-6}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn lifetime_defaults_to_chip_constants() {
        let c: LifetimeConfig = parse("{}").unwrap();
        c.validate().unwrap();
        assert_eq!(c.chip, ChipConstants::default());
        let c: LifetimeConfig = parse(r#"{"chip":{"temperature":300}}"#).unwrap();
        assert_eq!(c.chip.temperature, 300.0);
        assert_eq!(c.chip.h, 0.5e-6);
    }
}
