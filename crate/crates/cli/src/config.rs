//! Effective configuration: command-line flags over a JSON file over defaults.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Reads a config file. A top-level key named after the subcommand selects
/// that section; otherwise the whole object applies.
pub fn load_section(path: Option<&str>, command: &str) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Usage(format!("config {path} must be a JSON object")));
    };
    match obj.remove(command) {
        Some(Value::Object(section)) => Ok(section),
        Some(_) => Err(CliError::Usage(format!("config section `{command}` must be an object"))),
        None => Ok(obj),
    }
}

/// Defaults of `C`, overwritten by the file section, overwritten by the
/// flags that were given.
pub fn merge<C, F>(file: Map<String, Value>, flags: &F) -> Result<C, CliError>
where
    C: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut base = match serde_json::to_value(C::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config structs serialize to objects"),
    };
    for (k, v) in file {
        if !base.contains_key(&k) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        base.insert(k, v);
    }
    if let Ok(Value::Object(given)) = serde_json::to_value(flags) {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("bad configuration: {e}")))
}
