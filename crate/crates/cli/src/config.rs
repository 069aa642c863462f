//! TOML configuration with flag overrides.
//!
//! A config file has one table per subcommand (`[stats]`, `[boxdim]`, …) and
//! an optional `[run]` table for `workers` and `out`. Keys use the flag names
//! with underscores. Flags given on the command line win over the file.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn load(path: Option<&Path>) -> Result<Option<toml::Table>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?;
    Ok(Some(table))
}

fn section(file: Option<&toml::Table>, name: &str) -> Result<Map<String, Value>, CliError> {
    let Some(v) = file.and_then(|t| t.get(name)) else { return Ok(Map::new()) };
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::Usage(format!("config section [{name}] must be a table"))),
    }
}

/// Settings for `name`: defaults, then the file's `[name]` table, then every
/// flag that was given.
pub fn resolve<S, F>(file: Option<&toml::Table>, name: &str, flags: &F) -> Result<(S, Value), CliError>
where
    S: DeserializeOwned + Serialize,
    F: Serialize,
{
    let mut merged = section(file, name)?;
    if let Value::Object(given) = serde_json::to_value(flags).map_err(CliError::io)? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    let settings: S = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid settings for {name}: {e}")))?;
    let resolved = serde_json::to_value(&settings).map_err(CliError::io)?;
    Ok((settings, resolved))
}

/// A value from the `[run]` table.
pub fn run_value<T: DeserializeOwned>(file: Option<&toml::Table>, key: &str) -> Result<Option<T>, CliError> {
    let Some(v) = section(file, "run")?.remove(key) else { return Ok(None) };
    serde_json::from_value(v)
        .map(Some)
        .map_err(|e| CliError::Usage(format!("invalid [run] {key}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        seed: u64,
        depth: usize,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self { seed: 1, depth: 4 }
        }
    }

    #[derive(Serialize)]
    struct DemoFlags {
        seed: Option<u64>,
        depth: Option<usize>,
    }

    #[test]
    fn flags_override_file_over_defaults() {
        let file: toml::Table = "[demo]\nseed = 9\ndepth = 6\n".parse().unwrap();
        let flags = DemoFlags { seed: Some(3), depth: None };
        let (s, v): (Demo, _) = resolve(Some(&file), "demo", &flags).unwrap();
        assert_eq!(s, Demo { seed: 3, depth: 6 });
        assert_eq!(v["depth"], 6);
        let (s, _): (Demo, _) = resolve(None, "demo", &DemoFlags { seed: None, depth: None }).unwrap();
        assert_eq!(s, Demo::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let file: toml::Table = "[demo]\nsed = 9\n".parse().unwrap();
        let r: Result<(Demo, _), _> = resolve(Some(&file), "demo", &DemoFlags { seed: None, depth: None });
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn missing_file_is_a_usage_error() {
        assert!(matches!(load(Some(Path::new("/nonexistent/feigenlab.toml"))), Err(CliError::Usage(_))));
        let file: toml::Table = "[run]\nworkers = 2\n".parse().unwrap();
        assert_eq!(run_value::<usize>(Some(&file), "workers").unwrap(), Some(2));
        assert_eq!(run_value::<usize>(Some(&file), "out").unwrap(), None);
    }
}
