//! Scenario presets, configuration and output for `dicke-sim`.

// negated comparisons reject NaN parameters
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod scenario;

pub use config::{Analysis, ScenarioConfig};
pub use error::CliError;
pub use scenario::{run_scenario, Check, RunSummary};

/// Preset named `scenario` merged with an optional config file and overrides.
/// A config file may also name the scenario itself, in which case `scenario`
/// can be `None`.
pub fn resolve(scenario: Option<&str>, file: Option<&str>, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let from_file = match file {
        Some(text) => {
            let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            table.get("scenario").and_then(|v| v.as_str()).map(str::to_owned)
        }
        None => None,
    };
    let name = match (scenario, from_file.as_deref()) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("scenario {a:?} on the command line but {b:?} in the config file")));
        }
        (Some(a), _) => a.to_owned(),
        (None, Some(b)) => b.to_owned(),
        (None, None) => return Err(CliError::Config("no scenario named".into())),
    };
    let base = presets::preset(&name).ok_or_else(|| {
        CliError::Config(format!("unknown scenario {name:?}; known: {}", presets::names().collect::<Vec<_>>().join(", ")))
    })?;
    base.merged(file, overrides)
}
