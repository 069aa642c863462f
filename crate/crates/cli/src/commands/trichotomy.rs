//! `trichotomy`: classify an `(eta_m, xi_m)` sequence.

use std::fs;
use std::path::Path;

use clap::Args;
use feigenlab::trichotomy::{classify, classify_stability, Regime, DEFAULT_CALIBRATION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::expr::Expr;
use crate::run::{csv_table, num, Outputs};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct TrichotomyFlags {
    /// Synthetic sequences, e.g. `eta=1/m xi=1/m`.
    #[arg(long, num_args = 2, value_names = ["ETA", "XI"])]
    pub synthetic: Option<Vec<String>>,
    /// Read `eta` and `xi` from the results of a `stats` run.
    #[arg(long)]
    pub from: Option<String>,
    /// Number of levels `m = 1..=levels` for synthetic input.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub calibration: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrichotomySettings {
    pub synthetic: Option<Vec<String>>,
    pub from: Option<String>,
    pub levels: usize,
    pub calibration: f64,
}

impl Default for TrichotomySettings {
    fn default() -> Self {
        Self { synthetic: None, from: None, levels: 12, calibration: DEFAULT_CALIBRATION }
    }
}

/// `eta=<expr>` and `xi=<expr>` in either order.
fn synthetic(defs: &[String], levels: usize) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let (mut eta, mut xi) = (None, None);
    for d in defs {
        let (name, body) = d
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected name=expression, got {d:?}")))?;
        let e: Expr = body.parse().map_err(|e| CliError::Usage(format!("in {d:?}: {e}")))?;
        let seq = (1..=levels).map(|m| e.eval(m as f64)).collect();
        match name.trim() {
            "eta" => eta = Some(seq),
            "xi" => xi = Some(seq),
            other => return Err(CliError::Usage(format!("unknown sequence {other:?}; use eta and xi"))),
        }
    }
    match (eta, xi) {
        (Some(e), Some(x)) => Ok((e, x)),
        _ => Err(CliError::Usage("synthetic input needs both eta= and xi=".into())),
    }
}

fn from_run(dir: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let path = dir.join("results.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(CliError::io)?;
    let rows = v["rows"]
        .as_array()
        .ok_or_else(|| CliError::Usage(format!("{} has no stats rows", path.display())))?;
    let field = |r: &Value, k: &str| r[k]["value"].as_f64().ok_or_else(|| CliError::Usage(format!("row without {k}")));
    let eta = rows.iter().map(|r| field(r, "eta")).collect::<Result<_, _>>()?;
    let xi = rows.iter().map(|r| field(r, "xi")).collect::<Result<_, _>>()?;
    Ok((eta, xi))
}

pub fn trichotomy(s: &TrichotomySettings) -> Result<Outputs, CliError> {
    let (eta, xi) = match (&s.synthetic, &s.from) {
        (Some(defs), None) => synthetic(defs, s.levels)?,
        (None, Some(dir)) => from_run(Path::new(dir))?,
        _ => return Err(CliError::Usage("give exactly one of --synthetic and --from".into())),
    };
    let verdict = classify(&eta, &xi, s.calibration)?;
    let stability = classify_stability(&eta, &xi)?;
    let stable = stability.iter().all(|v| v.class == verdict.class);
    let rows = eta
        .iter()
        .zip(&xi)
        .zip(&verdict.ratio_log)
        .enumerate()
        .map(|(i, ((e, x), r))| vec![(i + 1).to_string(), num(*e), num(*x), num(*r)]);
    let classes: Vec<Regime> = stability.iter().map(|v| v.class).collect();
    let summary = format!(
        "{:?}\n{}stable across calibrations {:?}: {stable}",
        verdict.class,
        verdict.report(),
        classes
    );
    Ok(Outputs {
        csv: Some(csv_table(&["m", "eta", "xi", "log_ratio"], rows)?),
        json: Some(json!({ "verdict": verdict, "stability": stability, "stable": stable })),
        summary,
        ..Outputs::default()
    })
}
