//! Layering of defaults, command-line flags and a JSON config file
//! (config file wins over flags, flags win over defaults).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Parsed config file: a JSON object with optional per-section objects.
#[derive(Debug, Default)]
pub struct ConfigFile {
    sections: Map<String, Value>,
}

const SECTIONS: [&str; 6] = ["synth", "window", "model", "train", "split", "ablation"];

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(sections) = value else {
            return Err(CliError::Usage(format!("config {} must be a JSON object", path.display())));
        };
        if let Some(bad) = sections.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!(
                "config {}: unknown section `{bad}` (expected one of {})",
                path.display(),
                SECTIONS.join(", ")
            )));
        }
        Ok(Self { sections })
    }

    /// Overlays section `name` (if present) onto `base`.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, name: &str, base: T) -> CliResult<T> {
        match self.sections.get(name) {
            None => Ok(base),
            Some(patch) => overlay(base, patch).map_err(|e| CliError::Usage(format!("config section `{name}`: {e}"))),
        }
    }
}

fn merge(dst: &mut Value, patch: &Value) {
    match (dst, patch) {
        (Value::Object(d), Value::Object(p)) => {
            for (k, v) in p {
                match d.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        d.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (d, p) => *d = p.clone(),
    }
}

pub fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: &Value) -> Result<T, serde_json::Error> {
    let mut value = serde_json::to_value(base)?;
    merge(&mut value, patch);
    serde_json::from_value(value)
}

/// Sets `*slot` when the flag was given.
pub fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct S {
        a: u32,
        b: String,
    }

    #[test]
    fn overlay_replaces_only_given_keys() {
        let out = overlay(S { a: 1, b: "x".into() }, &serde_json::json!({"a": 5})).unwrap();
        assert_eq!(out, S { a: 5, b: "x".into() });
        assert!(overlay(S { a: 1, b: "x".into() }, &serde_json::json!({"c": 5})).is_err());
    }
}
