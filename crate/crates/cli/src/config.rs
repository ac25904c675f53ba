//! Scenario configuration: a preset merged with an optional TOML file and
//! `key=value` overrides, then parsed strictly.
//!
//! Every rate in `[system]` and every drive in `[sweep]` is `f/2π` in MHz.

use std::collections::BTreeSet;

use dicke_core::model::{SystemSpec, ThreeLevel};
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    /// Cavity emission of initially excited emitters: full model, ladder ODE
    /// and closed form.
    Superradiance,
    /// Peak discrepancy against the ladder for several `κ/ḡ` at fixed `ḡ`.
    KappaSweep,
    /// Two-level against three-level emitters.
    ThreeLevelCompare,
    /// Closed-form single-qubit Q-function on a grid.
    BistabilityQ,
    /// Single-qubit steady-state peaks against `α_ss^±` over `sweep.drives`.
    PeakSweep,
    /// Driven steady state, Q-function peaks against the multistable amplitudes.
    Multistability,
}

/// A per-emitter quantity given either once for all emitters or per emitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerEmitter {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerEmitter {
    fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerEmitter::Uniform(v) => Ok(vec![*v; n]),
            PerEmitter::Each(v) if v.len() == n => Ok(v.clone()),
            PerEmitter::Each(v) => Err(CliError::Config(format!("system.{name} has {} entries for {n} emitters", v.len()))),
        }
    }
}

impl Default for PerEmitter {
    fn default() -> Self {
        PerEmitter::Uniform(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `g_j/2π`; the emitter count is the length of this list.
    pub couplings: Vec<f64>,
    pub kappa: f64,
    #[serde(default)]
    pub relaxation: PerEmitter,
    #[serde(default)]
    pub dephasing: PerEmitter,
    #[serde(default)]
    pub cavity_detuning: f64,
    #[serde(default)]
    pub qubit_detuning: PerEmitter,
    #[serde(default)]
    pub drive: f64,
    /// Third-level anharmonicity `α_r/2π`; absent for two-level emitters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anharmonicity: Option<f64>,
    /// e↔f couplings `G_j/2π`, `√2·g_j` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_couplings: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Fock-space cutoff; absent means the `(|α|+5)²` rule on the largest
    /// predicted amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default = "default_truncation_cap")]
    pub truncation_cap: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_tau_step")]
    pub tau_step: f64,
    #[serde(default = "default_grid_spacing")]
    pub grid_spacing: f64,
    #[serde(default = "default_grid_margin")]
    pub grid_margin: f64,
    /// Gauss-Jacobi order for the closed-form Q; absent means the default
    /// for the coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(default = "default_top_fock_tolerance")]
    pub top_fock_tolerance: f64,
    #[serde(default = "default_min_prominence")]
    pub min_prominence: f64,
    /// Permit steady-state systems above `LARGE_SYSTEM_ROWS`.
    #[serde(default)]
    pub allow_large: bool,
}

fn default_truncation_cap() -> usize {
    200
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_tau_max() -> f64 {
    3.0
}
fn default_tau_step() -> f64 {
    0.01
}
fn default_grid_spacing() -> f64 {
    0.1
}
fn default_grid_margin() -> f64 {
    3.0
}
fn default_top_fock_tolerance() -> f64 {
    1e-6
}
fn default_min_prominence() -> f64 {
    0.05
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            truncation: None,
            truncation_cap: default_truncation_cap(),
            rtol: default_rtol(),
            atol: default_atol(),
            tau_max: default_tau_max(),
            tau_step: default_tau_step(),
            grid_spacing: default_grid_spacing(),
            grid_margin: default_grid_margin(),
            quadrature_order: None,
            top_fock_tolerance: default_top_fock_tolerance(),
            min_prominence: default_min_prominence(),
            allow_large: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bad_cavity_ratios: Vec<f64>,
    /// Drive amplitudes `E/2π` in MHz.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drives: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// The summary record is written regardless.
    #[serde(default = "default_formats")]
    pub formats: BTreeSet<Format>,
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> BTreeSet<Format> {
    [Format::Csv, Format::Json].into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub analysis: Analysis,
    pub system: SystemConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn n_emitters(&self) -> usize {
        self.system.couplings.len()
    }

    /// Angular-rate spec with the given cutoff.
    pub fn spec(&self, fock_dim: usize) -> Result<SystemSpec, CliError> {
        let s = &self.system;
        let n = s.couplings.len();
        let mhz = SystemSpec {
            n_qubits: n,
            couplings: s.couplings.clone(),
            cavity_detuning: s.cavity_detuning,
            qubit_detunings: s.qubit_detuning.expand(n, "qubit_detuning")?,
            kappa: s.kappa,
            relaxation: s.relaxation.expand(n, "relaxation")?,
            dephasing: s.dephasing.expand(n, "dephasing")?,
            drive: s.drive,
            fock_dim,
            three_level: s.anharmonicity.map(|a| ThreeLevel { upper_couplings: s.upper_couplings.clone(), ..ThreeLevel::new(a) }),
        };
        if s.anharmonicity.is_none() && s.upper_couplings.is_some() {
            return Err(CliError::Config("system.upper_couplings needs system.anharmonicity".into()));
        }
        let spec = SystemSpec::from_mhz(&mhz);
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// Range checks that do not need the engine.
    pub fn validate(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        if self.system.couplings.is_empty() {
            return Err(CliError::Config("system.couplings is empty".into()));
        }
        for (name, v) in [("rtol", n.rtol), ("atol", n.atol), ("tau_max", n.tau_max), ("tau_step", n.tau_step), ("grid_spacing", n.grid_spacing)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if !(n.grid_margin >= 0.0) || !(n.min_prominence >= 0.0) || !(n.top_fock_tolerance > 0.0) {
            return Err(CliError::Config("numerics.grid_margin, min_prominence and top_fock_tolerance must be nonnegative".into()));
        }
        match self.analysis {
            Analysis::KappaSweep if self.sweep.bad_cavity_ratios.is_empty() => {
                Err(CliError::Config("kappa-sweep needs sweep.bad_cavity_ratios".into()))
            }
            Analysis::PeakSweep if self.sweep.drives.is_empty() => Err(CliError::Config("peak-sweep needs sweep.drives".into())),
            Analysis::ThreeLevelCompare if self.system.anharmonicity.is_none() => {
                Err(CliError::Config("three-level-compare needs system.anharmonicity".into()))
            }
            Analysis::Superradiance | Analysis::KappaSweep | Analysis::ThreeLevelCompare if n.truncation.is_none() => {
                Err(CliError::Config(format!("{:?} needs numerics.truncation", self.analysis)))
            }
            _ => {
                self.spec(n.truncation.unwrap_or(2))?;
                Ok(())
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Applies `overrides` on top of `self`, then parses strictly.
    pub fn merged(&self, file: Option<&str>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(text) = file {
            let table: Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            merge(&mut value, table);
        }
        for item in overrides {
            set(&mut value, item)?;
        }
        let merged: ScenarioConfig = value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Table(b), Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `numerics.truncation=30`, `system.couplings=[1.0, 2.0]`, `scenario=x`.
fn set(root: &mut Value, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let (path, raw) = (path.trim(), raw.trim());
    // parse as a TOML value, falling back to a bare string
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{} is not a table", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        node = table.entry(key.to_string()).or_insert_with(|| Value::Table(Default::default()));
    }
    Err(CliError::Config(format!("empty key in override {item:?}")))
}
