//! Versioned JSON configuration for PDE runs and sweeps.

use std::path::Path;

use dskg_core::blowup_ode::GammaSchedule;
use dskg_core::semilinear::{BumpData, Grid1D, PhysicalParams};
use dskg_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Fd,
    Picard,
}

/// One PDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub schema_version: u32,
    pub params: PhysicalParams,
    pub gamma: GammaSchedule,
    pub data: BumpData,
    pub dx: f64,
    /// Defaults to `dx / 2`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_max: f64,
    #[serde(default)]
    pub backend: Backend,
}

impl PdeConfig {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.5 * self.dx)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::covering(self.data.r0, self.dx, self.dt(), self.t_max)
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        self.gamma.validate()?;
        if self.params.n() != 1 {
            return Err(Error::Config(format!(
                "PDE runs are 1-D only, got n = {}",
                self.params.n()
            )));
        }
        self.grid().map(|_| ())
    }
}

/// Grid of sweep points. Either `m` or `mass` (the curved mass `M`) is
/// given; the weight at each point is `Γ = c (1 + t)^{d1} e^{d0 t}` and the
/// data are bumps with `C0 = C1 = amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub schema_version: u32,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<f64>>,
    pub p: Vec<f64>,
    #[serde(default = "zero_list")]
    pub beta: Vec<f64>,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    #[serde(default = "unit")]
    pub c: f64,
    pub amplitude: Vec<f64>,
    #[serde(default = "unit")]
    pub r0: f64,
    pub t_max: f64,
    pub dx: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Worker count; defaults to the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}

/// How the mass axis of a sweep is parametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassAxis {
    Physical,
    Curved,
}

impl ScanSpec {
    pub fn mass_axis(&self) -> Result<(MassAxis, &[f64])> {
        match (&self.m, &self.mass) {
            (Some(m), None) => Ok((MassAxis::Physical, m)),
            (None, Some(mass)) => Ok((MassAxis::Curved, mass)),
            _ => Err(Error::Config("scan spec needs exactly one of 'm' and 'mass'".into())),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.5 * self.dx)
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        let (_, masses) = self.mass_axis()?;
        let axes: [(&str, &[f64]); 6] = [
            ("mass", masses),
            ("p", &self.p),
            ("beta", &self.beta),
            ("d0", &self.d0),
            ("d1", &self.d1),
            ("amplitude", &self.amplitude),
        ];
        for (name, axis) in axes {
            if axis.is_empty() {
                return Err(Error::Config(format!("axis '{name}' is empty")));
            }
            if let Some(v) = axis.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("axis '{name}' has non-finite value {v}")));
            }
        }
        if self.n != 1 {
            return Err(Error::Config(format!("sweeps run the 1-D solver, got n = {}", self.n)));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config(format!(
                "weight constant c must be positive, got {}",
                self.c
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Grid1D::covering(self.r0, self.dx, self.dt(), self.t_max).map(|_| ())
    }

    pub fn len(&self) -> usize {
        let masses = self.mass_axis().map(|(_, m)| m.len()).unwrap_or(0);
        masses * self.p.len() * self.beta.len() * self.amplitude.len() * self.d1.len() * self.d0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Set a top-level key, as done by command-line overrides.
pub fn override_key(doc: &mut Value, key: &str, value: impl Into<Value>) -> Result<()> {
    match doc {
        Value::Object(map) => {
            map.insert(key.to_string(), value.into());
            Ok(())
        }
        _ => Err(Error::Config("configuration must be a JSON object".into())),
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn from_value<T: DeserializeOwned>(doc: Value) -> Result<T> {
    serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_pde_config(doc: Value) -> Result<PdeConfig> {
    let cfg: PdeConfig = from_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scan_spec(doc: Value) -> Result<ScanSpec> {
    let spec: ScanSpec = from_value(doc)?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn pde_doc() -> Value {
        json!({
            "schema_version": 1,
            "params": {"n": 1, "m": 0.3, "p": 2.0},
            "gamma": {"kind": "pure_exp", "gamma": -1.0},
            "data": {"r0": 1.0, "c0": 0.0, "c1": 0.0},
            "dx": 0.01,
            "t_max": 1.0
        })
    }

    #[test]
    fn pde_defaults() {
        let cfg = load_pde_config(pde_doc()).unwrap();
        assert_eq!(cfg.dt(), 0.005);
        assert_eq!(cfg.backend, Backend::Fd);
        assert_eq!(cfg.params.beta(), 0.0);
    }

    #[test]
    fn overrides_and_rejections() {
        let mut doc = pde_doc();
        override_key(&mut doc, "dt", 0.02).unwrap();
        assert!(matches!(load_pde_config(doc), Err(Error::Config(_))));
        let mut doc = pde_doc();
        override_key(&mut doc, "schema_version", 2).unwrap();
        assert!(matches!(load_pde_config(doc), Err(Error::Config(_))));
        let mut doc = pde_doc();
        override_key(&mut doc, "surprise", 1).unwrap();
        assert!(load_pde_config(doc).is_err());
    }

    #[test]
    fn scan_mass_axis() {
        let doc = json!({
            "schema_version": 1, "mass": [0.5], "p": [2.0], "d0": [-1.0, 0.0], "d1": [3.0],
            "amplitude": [1e-3], "t_max": 5.0, "dx": 0.01
        });
        let spec = load_scan_spec(doc.clone()).unwrap();
        assert_eq!(spec.mass_axis().unwrap().0, MassAxis::Curved);
        assert_eq!(spec.len(), 2);
        let mut both = doc;
        override_key(&mut both, "m", json!([0.0])).unwrap();
        assert!(matches!(load_scan_spec(both), Err(Error::Config(_))));
    }
}
