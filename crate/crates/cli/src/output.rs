use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON text with a top-level `version` field; non-object values are wrapped
/// as `{"version", "data"}`.
pub fn versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut obj = match v {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("data".into(), other);
            map
        }
    };
    obj.insert("version".into(), Value::String(VERSION.into()));
    Ok(serde_json::to_string_pretty(&Value::Object(obj))? + "\n")
}

/// Same as [`versioned_json`] for text that is already JSON.
pub fn versioned_json_text(text: &str) -> Result<String> {
    let v: Value = serde_json::from_str(text)?;
    versioned_json(&v)
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Shortest decimal after rounding to 12 places, so `2.0000000000000004` prints `2`.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else { v.to_string() };
    }
    let r = (v * 1e12).round() / 1e12;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}
