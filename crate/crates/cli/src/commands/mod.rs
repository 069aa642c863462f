//! Subcommand settings and their execution.
//!
//! Every command is a pure function of its resolved settings, so a manifest
//! holds everything needed to replay it.

pub mod dimension;
pub mod fibonacci;
pub mod nest;
pub mod params;
pub mod series;
pub mod trichotomy;

use feigenlab::dynamics::{find_doubling_limit, FamilyMap};
use num_complex::Complex;
use serde::{Deserialize, Deserializer};
use serde_json::Value;

use crate::run::Outputs;
use crate::CliError;

/// Tolerance for the doubling-limit parameter used when `c` is omitted.
pub const DEFAULT_LIMIT_TOL: f64 = 1e-10;

pub fn execute(command: &str, config: &Value) -> Result<Outputs, CliError> {
    fn settings<S: serde::de::DeserializeOwned>(config: &Value) -> Result<S, CliError> {
        serde_json::from_value(config.clone()).map_err(|e| CliError::Usage(format!("invalid settings: {e}")))
    }
    match command {
        "find-param" => params::find_param(&settings(config)?),
        "solve-fixedpoint" => params::solve_fixedpoint(&settings(config)?),
        "build-nest" => nest::build(&settings(config)?),
        "stats" => nest::stats(&settings(config)?),
        "poincare" => series::poincare(&settings(config)?),
        "measure" => series::measure(&settings(config)?),
        "scaling" => series::scaling(&settings(config)?),
        "boxdim" => dimension::boxdim(&settings(config)?),
        "fibonacci" => fibonacci::fibonacci(&settings(config)?),
        "trichotomy" => trichotomy::trichotomy(&settings(config)?),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

/// Seeds recorded in the manifest.
pub fn seeds(config: &Value) -> Vec<u64> {
    config.get("seed").and_then(Value::as_u64).into_iter().collect()
}

/// `z^d + c`; without `c`, the period-doubling limit of degree `d`.
pub fn family_map(c: Option<[f64; 2]>, degree: u32) -> Result<FamilyMap<f64>, CliError> {
    let c = match c {
        Some(c) => Complex::new(c[0], c[1]),
        None => Complex::new(find_doubling_limit::<f64>(degree, DEFAULT_LIMIT_TOL)?.parameter, 0.0),
    };
    Ok(FamilyMap::new(c, degree)?)
}

/// `re` or `re,im`.
pub fn parse_param(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let value = |p: &str| p.parse::<f64>().map_err(|e| format!("bad number {p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok([value(re)?, 0.0]),
        [re, im] => Ok([value(re)?, value(im)?]),
        _ => Err(format!("expected re or re,im, got {s:?}")),
    }
}

/// A count written as an integer or in exponent notation (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    count_from_f64(x).ok_or_else(|| format!("not a non-negative integer: {s:?}"))
}

fn count_from_f64(x: f64) -> Option<u64> {
    (x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64).then_some(x as u64)
}

/// `a..b` with `a < b`.
pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if a >= b {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

/// Accepts `1000000` or `1e6` in a config file.
pub fn de_count<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Count {
        Int(u64),
        Float(f64),
        Text(String),
    }
    match Count::deserialize(d)? {
        Count::Int(n) => Ok(n),
        Count::Float(x) => count_from_f64(x).ok_or_else(|| serde::de::Error::custom(format!("not a count: {x}"))),
        Count::Text(s) => parse_count(&s).map_err(serde::de::Error::custom),
    }
}

/// Accepts `-1.4`, `[re, im]` or `"re,im"` in a config file.
pub fn de_param<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[f64; 2]>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Param {
        Real(f64),
        Pair([f64; 2]),
        Text(String),
    }
    Ok(match Option::<Param>::deserialize(d)? {
        None => None,
        Some(Param::Real(re)) => Some([re, 0.0]),
        Some(Param::Pair(p)) => Some(p),
        Some(Param::Text(s)) => Some(parse_param(&s).map_err(serde::de::Error::custom)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_values() {
        assert_eq!(parse_param("-1.4").unwrap(), [-1.4, 0.0]);
        assert_eq!(parse_param("0.25, -0.5").unwrap(), [0.25, -0.5]);
        assert!(parse_param("1,2,3").is_err());
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("250").unwrap(), 250);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert_eq!(parse_range("0..4").unwrap(), (0, 4));
        assert!(parse_range("3..3").is_err());
        assert!(parse_range("4").is_err());
    }

    #[test]
    fn config_values() {
        #[derive(Deserialize)]
        struct S {
            #[serde(deserialize_with = "de_count")]
            n: u64,
            #[serde(default, deserialize_with = "de_param")]
            c: Option<[f64; 2]>,
        }
        let s: S = serde_json::from_str(r#"{"n": 1e6, "c": -2.0}"#).unwrap();
        assert_eq!((s.n, s.c), (1_000_000, Some([-2.0, 0.0])));
        let s: S = serde_json::from_str(r#"{"n": "1e3", "c": [0.1, 0.2]}"#).unwrap();
        assert_eq!((s.n, s.c), (1000, Some([0.1, 0.2])));
        let s: S = serde_json::from_str(r#"{"n": 5}"#).unwrap();
        assert_eq!(s.c, None);
        assert!(serde_json::from_str::<S>(r#"{"n": 0.5}"#).is_err());
    }

    #[test]
    fn unknown_command() {
        assert!(matches!(execute("nope", &Value::Null), Err(CliError::Usage(_))));
    }
}
