//! Config files and `--set` overrides.
//!
//! A config is a flat TOML table of scenario parameters. An optional
//! `scenario` key must agree with the scenario named on the command line.
//! Overrides are applied on top of the file; flags win.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

/// A problem with the user's input. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn load_table(path: Option<&Path>) -> Result<Table, UsageError> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| usage(format!("config {} is not valid TOML: {e}", path.display())))
}

/// Parses `key=value`. The value is read as a TOML literal when it is one
/// (`3`, `1e-6`, `true`, `[0.5, 1.0]`, `"rwa"`) and as a bare string otherwise.
pub fn parse_override(spec: &str) -> Result<(String, Value), UsageError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(usage(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), UsageError> {
    for spec in overrides {
        let (key, value) = parse_override(spec)?;
        table.insert(key, value);
    }
    Ok(())
}

/// Drops the `scenario` key after checking it names `scenario`.
pub fn take_scenario_key(table: &mut Table, scenario: &str) -> Result<(), UsageError> {
    match table.remove("scenario") {
        None => Ok(()),
        Some(Value::String(s)) if s == scenario => Ok(()),
        Some(other) => Err(usage(format!(
            "config names scenario {other} but the command line asks for `{scenario}`"
        ))),
    }
}

pub fn deserialize<P: DeserializeOwned>(table: Table, scenario: &str) -> Result<P, UsageError> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("invalid config for scenario `{scenario}`: {}", e.message())))
}

/// The resolved config as TOML, `scenario` first. Feeding it back through
/// `--config` reproduces the run.
pub fn resolved_toml<P: Serialize>(scenario: &str, params: &P) -> Result<String, UsageError> {
    let body = toml::to_string(params).map_err(|e| usage(format!("cannot serialize config: {e}")))?;
    Ok(format!("scenario = \"{scenario}\"\n{body}"))
}
