//! `poincare`, `measure` and `scaling`.

use clap::Args;
use feigenlab::conformal::{build_cutoff_measure, check_covariance, grid_cells, AtomicMeasure};
use feigenlab::dimension::{default_radii, log_correction_fit, scaling_exponent};
use feigenlab::poincare::{
    bound_delta_cr, closed_form_c0, default_base_point, divergence_diagnostic, poincare_partial_sums,
    DEFAULT_PRUNE_EPS, DEFAULT_SLOPE_EPS, MIN_DIAGNOSTIC_DEPTH,
};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{de_param, family_map, parse_param};
use crate::run::{csv_table, num, opt_num, Outputs};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct PoincareFlags {
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Preimage depth `J`.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Base point `re[,im]`; defaults to 1.5 times the escape radius.
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub base: Option<[f64; 2]>,
    #[arg(long)]
    pub prune_eps: Option<f64>,
    /// Increasing exponents to bracket the critical exponent.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub delta: f64,
    pub depth: usize,
    #[serde(deserialize_with = "de_param")]
    pub base: Option<[f64; 2]>,
    pub prune_eps: f64,
    pub deltas: Option<Vec<f64>>,
}

impl Default for PoincareSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            delta: 1.0,
            depth: 12,
            base: None,
            prune_eps: DEFAULT_PRUNE_EPS,
            deltas: None,
        }
    }
}

pub fn poincare(s: &PoincareSettings) -> Result<Outputs, CliError> {
    let map = family_map(s.c, s.degree)?;
    let z = s.base.map(|b| Complex::new(b[0], b[1])).unwrap_or_else(|| default_base_point(&map));
    let acc = poincare_partial_sums(&map, z, s.delta, s.depth, s.prune_eps)?;
    // Closed form for the monomial, which depends on |z| only.
    let monomial = map.c() == Complex::new(0.0, 0.0) && s.degree == 2;
    let oracle = |j: usize| monomial.then(|| closed_form_c0(z.norm(), s.delta, j)).transpose();
    let mut rows = Vec::with_capacity(s.depth + 1);
    for j in 0..=s.depth {
        rows.push(vec![
            j.to_string(),
            num(acc.partial_sums[j]),
            num(acc.level_sums[j]),
            num(acc.pruned_by_level[j]),
            opt_num(oracle(j)?),
        ]);
    }
    let divergence =
        (s.depth >= MIN_DIAGNOSTIC_DEPTH).then(|| divergence_diagnostic(&acc, DEFAULT_SLOPE_EPS)).transpose()?;
    let bracket = s.deltas.as_ref().map(|g| bound_delta_cr(&map, z, s.depth, g, s.prune_eps)).transpose()?;
    let mut summary = format!("Poincaré series, delta = {}, J = {}: S_J = {}", s.delta, s.depth, num(acc.total()));
    if let Some(d) = &divergence {
        summary.push_str(&format!("\n  {:?}, growth factor {:.6}", d.verdict, d.growth));
    }
    if let Some(b) = &bracket {
        summary.push_str(&format!("\n  critical exponent in [{}, {}]", b.low, b.high));
    }
    Ok(Outputs {
        csv: Some(csv_table(&["j", "partial_sum", "level_sum", "pruned", "closed_form"], rows)?),
        json: Some(json!({ "account": acc, "divergence": divergence, "bracket": bracket })),
        summary,
        ..Outputs::default()
    })
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureFlags {
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Atoms closer than this to 0 end their branch.
    #[arg(long)]
    pub cut: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Covariance window `x0,x1,y0,y1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    /// Side of the covariance test boxes.
    #[arg(long)]
    pub cell: Option<f64>,
    /// Exponent used in the covariance test; defaults to `delta`.
    #[arg(long)]
    pub test_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub delta: f64,
    pub cut: f64,
    pub depth: usize,
    pub window: Vec<f64>,
    pub cell: f64,
    pub test_delta: Option<f64>,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            delta: 1.0,
            cut: 0.1,
            depth: 12,
            window: vec![-2.2, 2.2, -0.05, 0.05],
            cell: 0.05,
            test_delta: None,
        }
    }
}

fn measure_table(mu: &AtomicMeasure) -> Result<String, CliError> {
    let rows = mu.atoms.iter().map(|a| {
        vec![
            num(a.re),
            num(a.im),
            num(a.weight),
            a.depth.to_string(),
            a.parent.map(|p| p.to_string()).unwrap_or_default(),
            num(a.log_deriv),
        ]
    });
    csv_table(&["re", "im", "weight", "depth", "parent", "log_deriv"], rows)
}

pub fn measure(s: &MeasureSettings) -> Result<Outputs, CliError> {
    let [x0, x1, y0, y1] = s.window[..] else {
        return Err(CliError::Usage("window needs four values x0,x1,y0,y1".into()));
    };
    let map = family_map(s.c, s.degree)?;
    let mu = build_cutoff_measure(&map, s.delta, s.cut, s.depth)?;
    let test_delta = s.test_delta.unwrap_or(s.delta);
    let report = check_covariance(&mu, test_delta, &grid_cells(x0, x1, y0, y1, s.cell));
    Ok(Outputs {
        csv: Some(measure_table(&mu)?),
        json: Some(json!({
            "c": [map.c().re, map.c().im],
            "delta": mu.delta,
            "cut_radius": mu.cut_radius,
            "max_depth": mu.max_depth,
            "atoms": mu.atoms.len(),
            "normalizer": mu.normalizer,
            "total_mass": mu.total_mass,
            "covariance": { "delta": test_delta, "report": report },
        })),
        summary: format!(
            "{} atoms, normaliser {}; covariance residual {:.3e} on {} boxes ({} skipped)",
            mu.atoms.len(),
            num(mu.normalizer),
            report.max_residual,
            report.checked,
            report.skipped
        ),
        ..Outputs::default()
    })
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingFlags {
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub c: Option<[f64; 2]>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub cut: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Disk centre `re[,im]`; defaults to the critical value.
    #[arg(long, value_parser = parse_param, allow_hyphen_values = true)]
    pub center: Option<[f64; 2]>,
    /// Decreasing radii; dyadic from the largest radius down to four cut radii when omitted.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub max_radius: Option<f64>,
    /// Also fit `mu(B_r) / r^2` against `log(1/r)`.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub log_correction: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSettings {
    #[serde(deserialize_with = "de_param")]
    pub c: Option<[f64; 2]>,
    pub degree: u32,
    pub delta: f64,
    pub cut: f64,
    pub depth: usize,
    #[serde(deserialize_with = "de_param")]
    pub center: Option<[f64; 2]>,
    pub radii: Option<Vec<f64>>,
    pub max_radius: f64,
    pub log_correction: bool,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            c: None,
            degree: 2,
            delta: 1.0,
            cut: 1e-3,
            depth: 14,
            center: None,
            radii: None,
            max_radius: 0.5,
            log_correction: false,
        }
    }
}

pub fn scaling(s: &ScalingSettings) -> Result<Outputs, CliError> {
    let map = family_map(s.c, s.degree)?;
    let mu = build_cutoff_measure(&map, s.delta, s.cut, s.depth)?;
    let center = s.center.map(|p| Complex::new(p[0], p[1])).unwrap_or_else(|| map.critical_value());
    let radii = s.radii.clone().unwrap_or_else(|| default_radii(s.cut, s.max_radius));
    let fit = scaling_exponent(&mu, center, &radii)?;
    let log_fit = s.log_correction.then(|| log_correction_fit(&mu, center, &radii)).transpose()?;
    let rows = fit.radii.iter().zip(&fit.masses).map(|(r, m)| vec![num(*r), num(*m), num(m / (r * r))]);
    let mut summary = format!("sigma = {:.6} ± {:.2e} (R² = {:.6})", fit.sigma, fit.stderr, fit.r2);
    if let Some(l) = &log_fit {
        summary.push_str(&format!(
            "\n  log correction slope {:.6}, R² = {:.6}, consistent: {}",
            l.fit.slope, l.fit.r2, l.consistent
        ));
    }
    Ok(Outputs {
        csv: Some(csv_table(&["radius", "mass", "mass_over_r2"], rows)?),
        json: Some(json!({ "center": [center.re, center.im], "fit": fit, "log_correction": log_fit })),
        summary,
        ..Outputs::default()
    })
}
