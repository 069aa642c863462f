//! `fibonacci`: principal nest of the real Fibonacci map.

use clap::Args;
use feigenlab::fibonacci::{fibonacci_nest, geometry_diagnostics, typical_orbit_indicator, RealNest};
use feigenlab::stats::{eta_xi_stats, Sampling};
use feigenlab::trichotomy::{classify, DEFAULT_CALIBRATION};
use feigenlab::{Extended, Real};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{de_count, parse_count};
use crate::run::{csv_table, num, Outputs};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct FibonacciFlags {
    /// Criticality of `a - |x|^ell`.
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Samples for level statistics on `m = 1..=levels` (0 skips them).
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub calibration: Option<f64>,
    /// Level whose visits define the typical-orbit indicator.
    #[arg(long)]
    pub indicator_level: Option<usize>,
    #[arg(long, value_parser = parse_count)]
    pub iterates: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FibonacciSettings {
    pub ell: f64,
    pub depth: usize,
    #[serde(deserialize_with = "de_count")]
    pub samples: u64,
    pub levels: usize,
    pub seed: u64,
    pub horizon: u64,
    pub calibration: f64,
    pub indicator_level: usize,
    #[serde(deserialize_with = "de_count")]
    pub iterates: u64,
}

impl Default for FibonacciSettings {
    fn default() -> Self {
        Self {
            ell: 2.0,
            depth: 10,
            samples: 0,
            levels: 5,
            seed: 1,
            horizon: 500,
            calibration: DEFAULT_CALIBRATION,
            indicator_level: 7,
            iterates: 20_000,
        }
    }
}

pub fn fibonacci(s: &FibonacciSettings) -> Result<Outputs, CliError> {
    let nest = fibonacci_nest(Extended::from(s.ell), s.depth)?;
    let geometry = geometry_diagnostics(&nest);
    let rows = (0..=nest.depth()).map(|n| {
        let ratio = geometry.ratios.get(n).map(|r| num(*r)).unwrap_or_default();
        let gap = geometry.gaps.get(n).map(|g| num(*g)).unwrap_or_default();
        let lateral = nest.lateral_return_times.get(n).map(|t| t.to_string()).unwrap_or_default();
        vec![n.to_string(), num(nest.half_widths[n].as_f64()), nest.return_times[n].to_string(), lateral, ratio, gap]
    });
    let csv = csv_table(&["n", "half_width", "return_time", "lateral_return_time", "ratio", "gap"], rows)?;
    let mut summary = format!(
        "Fibonacci map, ell = {}: a = {}\n  return times {:?}\n  geometry {:?} (min ratio {:.4} from level {})",
        s.ell,
        num(nest.map.a().as_f64()),
        nest.return_times,
        geometry.verdict,
        geometry.min_ratio,
        geometry.window_start
    );
    let mut extra = Vec::new();
    let mut dynamics = serde_json::Value::Null;
    if s.samples > 0 {
        let sys = RealNest::from(&nest);
        let cfg = Sampling { samples: s.samples, seed: s.seed, horizon: s.horizon };
        let mut stats = Vec::with_capacity(s.levels);
        for m in 1..=s.levels {
            stats.extend(eta_xi_stats(&sys, m, m + 1, cfg)?);
        }
        let eta: Vec<f64> = stats.iter().map(|r| r.eta.value).collect();
        let xi: Vec<f64> = stats.iter().map(|r| r.xi.value).collect();
        let verdict = classify(&eta, &xi, s.calibration)?;
        let indicator = typical_orbit_indicator(&sys, s.indicator_level, s.samples, s.iterates, s.seed)?;
        extra.push(("stats.csv".to_string(), super::nest::stats_table(&stats)?));
        summary.push_str(&format!(
            "\n  trichotomy {:?}, tilt {:+.4}; typical-orbit indicator {:.4}",
            verdict.class, verdict.tilt, indicator.value
        ));
        dynamics = json!({ "stats": stats, "verdict": verdict, "typical_orbit_indicator": indicator });
    }
    Ok(Outputs {
        csv: Some(csv),
        json: Some(json!({
            "ell": s.ell,
            "parameter": nest.map.a().as_f64(),
            "return_times": nest.return_times,
            "lateral_return_times": nest.lateral_return_times,
            "geometry": geometry,
            "dynamics": dynamics,
        })),
        extra,
        summary,
        ..Outputs::default()
    })
}
