//! Scenario files: TOML with optional unit suffixes on numbers.
//!
//! ```toml
//! topology = "three-terminal-default"
//! breaker_design = "hybrid"
//! fault = { line = 4, time = "20ms" }
//! ```

use toml::{Table, Value};

use crate::error::{Result, SimError};
use crate::scenario::ScenarioConfig;

/// Parses, fills defaults and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    parse_with_overrides(text, &[])
}

/// Like [`parse_scenario`], with `key=value` overrides applied on top of
/// the file before validation.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| syntax_error(text, &e))?;
    let mut value = Value::Table(table);
    normalize_units(&mut value);
    let mut config = from_value(value)?;
    for o in overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| {
            SimError::config("override", format!("expected key=value, got `{o}`"))
        })?;
        config = with_override(&config, path.trim(), raw.trim())?;
    }
    config.validate()?;
    Ok(config)
}

/// Effective configuration as TOML, every field written out.
pub fn to_toml(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| SimError::config("config", e.to_string()))
}

/// Sets the field at dotted `path` to `raw`, which is read as a TOML
/// value (bare words become strings) and may carry a unit suffix.
pub fn with_override(base: &ScenarioConfig, path: &str, raw: &str) -> Result<ScenarioConfig> {
    let mut root = Value::try_from(base).map_err(|e| SimError::config(path, e.to_string()))?;
    let mut new = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    };
    normalize_units(&mut new);

    let mut slot = &mut root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        let table = slot
            .as_table_mut()
            .ok_or_else(|| SimError::config(path, "path does not address a config field"))?;
        if last {
            let old = table
                .get(*part)
                .ok_or_else(|| SimError::config(path, "no such config field"))?;
            // Integers and floats are interchangeable for numeric fields.
            if let (Value::Float(_), Value::Integer(i)) = (old, &new) {
                new = Value::Float(*i as f64);
            }
            table.insert((*part).to_string(), new.clone());
            break;
        }
        slot = table
            .get_mut(*part)
            .ok_or_else(|| SimError::config(path, "no such config field"))?;
    }
    from_value(root)
}

fn from_value(value: Value) -> Result<ScenarioConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let reason = e.inner().to_string();
        let mut field = e.path().to_string();
        // Missing keys are reported against their parent table.
        if reason.starts_with("missing field") {
            if let Some(key) = reason.split('`').nth(1) {
                field = if field == "." {
                    key.to_string()
                } else {
                    format!("{field}.{key}")
                };
            }
        }
        if field == "." {
            field = "config".into();
        }
        SimError::Config {
            field,
            reason: reason.trim_end().to_string(),
        }
    })
}

fn syntax_error(text: &str, e: &toml::de::Error) -> SimError {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    SimError::Syntax {
        line,
        message: e.message().to_string(),
    }
}

/// Scale factors of accepted unit suffixes.
const UNITS: &[(&str, f64)] = &[
    ("ms", 1e-3),
    ("us", 1e-6),
    ("µs", 1e-6),
    ("ns", 1e-9),
    ("s", 1.0),
    ("kA", 1e3),
    ("A", 1.0),
    ("kV", 1e3),
    ("V", 1.0),
    ("mH", 1e-3),
    ("H", 1.0),
    ("uF", 1e-6),
    ("µF", 1e-6),
    ("F", 1.0),
    ("MW", 1.0),
    ("MJ", 1e6),
    ("kJ", 1e3),
    ("J", 1.0),
    ("mohm", 1e-3),
    ("ohm", 1.0),
    ("Ω", 1.0),
];

/// Parses "20ms", "1.5 kA" and the like into SI numbers.
pub fn parse_quantity(s: &str) -> Option<f64> {
    let s = s.trim();
    for (suffix, scale) in UNITS {
        if let Some(num) = s.strip_suffix(suffix) {
            if let Ok(x) = num.trim().parse::<f64>() {
                return Some(x * scale);
            }
        }
    }
    None
}

fn normalize_units(value: &mut Value) {
    match value {
        Value::String(s) => {
            if let Some(x) = parse_quantity(s) {
                *value = Value::Float(x);
            }
        }
        Value::Table(t) => {
            for (_, v) in t.iter_mut() {
                normalize_units(v);
            }
        }
        Value::Array(a) => {
            for v in a.iter_mut() {
                normalize_units(v);
            }
        }
        _ => {}
    }
}
