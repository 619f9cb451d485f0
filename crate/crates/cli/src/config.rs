//! Optional config file whose per-subcommand tables supply defaults for flags.

use std::path::Path;

use panostage_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Parses a TOML or JSON config file into a JSON object keyed by subcommand.
pub fn load_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))?
    } else {
        let t: toml::Value = toml::from_str(&text).map_err(|e| Error::format(path, e))?;
        serde_json::to_value(t).map_err(|e| Error::format(path, e))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(Error::format(path, "config must be a table of subcommand sections")),
    }
}

/// Overlays flags that were given on the command line onto the config
/// section for `command`, then deserializes the result (unknown keys fail).
pub fn merge_with_config<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&Map<String, Value>>,
    command: &str,
) -> Result<T> {
    let mut merged = match config.and_then(|c| c.get(command)) {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(Error::invalid(format!("config section [{command}] must be a table"))),
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Error::invalid(format!("invalid [{command}] configuration: {e}")))
}

/// Rejects config sections that do not name a subcommand.
pub fn check_sections(config: &Map<String, Value>, known: &[&str]) -> Result<()> {
    match config.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::invalid(format!("unknown config section [{k}]"))),
        None => Ok(()),
    }
}

pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::invalid(format!("missing required option --{flag}")))
}
