//! `build-nest` and `stats`.

use clap::Args;
use feigenlab::nest::{build_nest, DomainNest, RenormSchedule, UShape};
use feigenlab::sampling::Estimate;
use feigenlab::stats::{eta_xi_stats, level_stats, verify_exp_lemma, LevelStats, Sampling};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{de_count, de_param, family_map, parse_count, parse_param, parse_range};
use crate::run::{csv_table, num, opt_num, Outputs};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct NestFlags {
    /// Parameter `re[,im]`; defaults to the period-doubling limit.
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Radius of `V^{n+1}` relative to the level-`n` closest return.
    #[arg(long)]
    pub shape: Option<f64>,
    /// Relative periods `p_1,p_2,…`; period doubling when omitted.
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<u64>>,
    /// Use the concentric disk of this relative radius as `U^n`.
    #[arg(long)]
    pub u_disk: Option<f64>,
    /// Monte Carlo samples for the per-level diagnostics (0 skips them).
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NestSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub depth: usize,
    pub shape: f64,
    pub periods: Option<Vec<u64>>,
    pub u_disk: Option<f64>,
    #[serde(deserialize_with = "de_count")]
    pub samples: u64,
    pub seed: u64,
    pub horizon: u64,
}

impl Default for NestSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            depth: 6,
            shape: 0.5,
            periods: None,
            u_disk: None,
            samples: 0,
            seed: 1,
            horizon: 1000,
        }
    }
}

fn make_nest(
    c: Option<[f64; 2]>,
    degree: u32,
    depth: usize,
    shape: f64,
    periods: Option<&[u64]>,
    u_disk: Option<f64>,
) -> Result<DomainNest<f64>, CliError> {
    let map = family_map(c, degree)?;
    let schedule = match periods {
        Some(p) => RenormSchedule::new(p.to_vec())?,
        None => RenormSchedule::doubling(depth),
    };
    let nest = build_nest(map, &schedule, depth, shape)?;
    Ok(match u_disk {
        Some(factor) => nest.with_u_shape(UShape::Disk { factor }),
        None => nest,
    })
}

fn est(e: &Estimate) -> [String; 3] {
    [num(e.value), num(e.ci_low), num(e.ci_high)]
}

pub fn build(s: &NestSettings) -> Result<Outputs, CliError> {
    let nest = make_nest(s.c, s.degree, s.depth, s.shape, s.periods.as_deref(), s.u_disk)?;
    let record = nest.record();
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for level in &record.levels {
        let mut row = vec![
            level.n.to_string(),
            level.period.to_string(),
            num(level.v_radius),
            num(level.closest_return[0]),
            num(level.closest_return[1]),
        ];
        if s.samples > 0 {
            let n = level.n;
            let nice = nest.check_nice_property(n, (s.samples as usize).max(100), s.horizon as usize)?;
            let u = nest.u_fraction(n, s.samples, s.seed)?;
            let nesting = (n < s.depth).then(|| nest.nesting_violation(n, s.samples, s.seed)).transpose()?;
            row.extend(est(&nice));
            row.extend(est(&u));
            row.extend(nesting.map(|e| est(&e)).unwrap_or_default());
            diagnostics.push(json!({ "n": n, "reentry": nice, "u_fraction": u, "nesting_violation": nesting }));
        }
        rows.push(row);
    }
    let mut header = vec!["n", "period", "v_radius", "closest_return_re", "closest_return_im"];
    if s.samples > 0 {
        header.extend([
            "reentry",
            "reentry_lo",
            "reentry_hi",
            "u_fraction",
            "u_fraction_lo",
            "u_fraction_hi",
            "nesting_violation",
            "nesting_violation_lo",
            "nesting_violation_hi",
        ]);
    }
    let ratios = nest.radius_ratios();
    Ok(Outputs {
        csv: Some(csv_table(&header, rows)?),
        json: Some(json!({ "nest": record, "radius_ratios": ratios, "diagnostics": diagnostics })),
        summary: format!(
            "nest at c = {} to depth {}: radii {}",
            num(record.c[0]),
            s.depth,
            record.levels.iter().map(|l| format!("{:.4e}", l.v_radius)).collect::<Vec<_>>().join(" ")
        ),
        ..Outputs::default()
    })
}

#[derive(Debug, Args, Serialize)]
pub struct StatsFlags {
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    /// `m..n_max`: estimates at base level `m` for `n = m+1..=n_max`.
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<String>,
    /// Samples per estimator (`1e6` accepted).
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<u64>>,
    #[arg(long)]
    pub u_disk: Option<f64>,
    /// Only `eta` and `xi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub basic: bool,
}

fn parse_levels(s: &str) -> Result<String, String> {
    parse_range(s).map(|(a, b)| format!("{a}..{b}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub levels: String,
    #[serde(deserialize_with = "de_count")]
    pub samples: u64,
    pub seed: u64,
    pub horizon: u64,
    pub shape: f64,
    pub periods: Option<Vec<u64>>,
    pub u_disk: Option<f64>,
    pub basic: bool,
}

impl Default for StatsSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            levels: "0..4".into(),
            samples: 100_000,
            seed: 1,
            horizon: 1000,
            shape: 0.5,
            periods: None,
            u_disk: None,
            basic: false,
        }
    }
}

pub fn stats_table(rows: &[LevelStats]) -> Result<String, CliError> {
    let header = [
        "m",
        "n",
        "eta",
        "eta_lo",
        "eta_hi",
        "xi",
        "xi_lo",
        "xi_hi",
        "xi_censored",
        "rho",
        "rho_lo",
        "rho_hi",
        "kappa",
        "kappa_lo",
        "kappa_hi",
        "tau_min",
        "upsilon_min",
        "samples",
        "seed",
        "horizon",
    ];
    let body = rows.iter().map(|r| {
        let mut row = vec![r.m.to_string(), r.n.to_string()];
        row.extend(est(&r.eta));
        row.extend(est(&r.xi));
        row.push(num(r.xi_censored.value));
        for e in [&r.rho, &r.kappa] {
            row.extend(e.as_ref().map(est).unwrap_or_default());
        }
        row.extend([opt_num(r.tau_min), opt_num(r.upsilon_min)]);
        row.extend([r.samples.to_string(), r.seed.to_string(), r.horizon.to_string()]);
        row
    });
    csv_table(&header, body)
}

pub fn stats(s: &StatsSettings) -> Result<Outputs, CliError> {
    let (m, n_max) = parse_range(&s.levels).map_err(CliError::Usage)?;
    let nest = make_nest(s.c, s.degree, n_max, s.shape, s.periods.as_deref(), s.u_disk)?;
    let cfg = Sampling { samples: s.samples, seed: s.seed, horizon: s.horizon };
    let rows = if s.basic { eta_xi_stats(&nest, m, n_max, cfg)? } else { level_stats(&nest, m, n_max, cfg)? };
    let lemma = (rows.len() >= 3).then(|| verify_exp_lemma(&rows)).transpose()?;
    let c = nest.map().c();
    let mut summary = format!("stats at c = {} for m = {m}, n = {}..={n_max}\n", num(c.re), m + 1);
    for r in &rows {
        summary.push_str(&format!("  n = {:2}  eta = {:.6}  xi = {:.6}\n", r.n, r.eta.value, r.xi.value));
    }
    if let Some(l) = &lemma {
        summary.push_str(&format!("  exponential decay constant C = {:.4} (feasible: {})", l.constant, l.feasible));
    }
    Ok(Outputs {
        csv: Some(stats_table(&rows)?),
        json: Some(json!({ "c": [c.re, c.im], "rows": rows, "exp_lemma": lemma })),
        summary: summary.trim_end().to_string(),
        ..Outputs::default()
    })
}
