//! `find-param` and `solve-fixedpoint`.

use clap::{Args, ValueEnum};
use feigenlab::dynamics::{doubling_limit_at_depth, DoublingLimit, find_doubling_limit, find_superstable, superstable_cascade};
use feigenlab::fibonacci::{closest_returns, find_fibonacci_parameter, RealUnimodalMap};
use feigenlab::renorm::solve_cvitanovic;
use feigenlab::{Extended, Real};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::run::{csv_table, num, Outputs};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    /// Superstable parameter of a given period.
    Superstable,
    /// Accumulation point of the period-doubling cascade.
    Doubling,
    /// Real Fibonacci parameter of `a - |x|^ell`.
    Fibonacci,
}

#[derive(Debug, Args, Serialize)]
pub struct FindParamFlags {
    #[arg(long, value_enum)]
    pub kind: Option<ParamKind>,
    #[arg(long)]
    pub degree: Option<u32>,
    /// Period of the superstable cycle.
    #[arg(long)]
    pub period: Option<u64>,
    /// Bracket for a superstable search; without it the period must be a power of two.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    /// Fixed number of doublings instead of a tolerance.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Search in double-double arithmetic.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub extended: bool,
    #[arg(long)]
    pub ell: Option<f64>,
    /// Enforced closest returns of the Fibonacci parameter.
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FindParamSettings {
    pub kind: ParamKind,
    pub degree: u32,
    pub period: u64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub levels: Option<usize>,
    pub tol: f64,
    pub extended: bool,
    pub ell: f64,
    pub depth: usize,
}

impl Default for FindParamSettings {
    fn default() -> Self {
        Self {
            kind: ParamKind::Doubling,
            degree: 2,
            period: 2,
            lo: None,
            hi: None,
            levels: None,
            tol: super::DEFAULT_LIMIT_TOL,
            extended: false,
            ell: 2.0,
            depth: 7,
        }
    }
}

pub fn find_param(s: &FindParamSettings) -> Result<Outputs, CliError> {
    match s.kind {
        ParamKind::Superstable => {
            let c = match (s.lo, s.hi) {
                (Some(lo), Some(hi)) => find_superstable::<f64>(s.degree, s.period, lo, hi)?,
                (None, None) if s.period.is_power_of_two() => {
                    let k = s.period.trailing_zeros() as usize;
                    superstable_cascade::<f64>(s.degree, k)?[k]
                }
                (None, None) => {
                    return Err(CliError::Usage("period is not a power of two; give --lo and --hi".into()))
                }
                _ => return Err(CliError::Usage("--lo and --hi go together".into())),
            };
            Ok(Outputs {
                csv: Some(csv_table(&["period", "parameter"], [vec![s.period.to_string(), num(c)]])?),
                json: Some(json!({ "kind": "superstable", "period": s.period, "parameter": c })),
                summary: format!("superstable period {}: c = {}", s.period, num(c)),
                ..Outputs::default()
            })
        }
        ParamKind::Doubling => {
            let (superstable, gap_ratios, c) = if s.extended {
                let lim = doubling_limit(s, Extended::from(s.tol))?;
                (to_f64(&lim.superstable), to_f64(&lim.gap_ratios), lim.parameter.as_f64())
            } else {
                let lim = doubling_limit(s, s.tol)?;
                (lim.superstable, lim.gap_ratios, lim.parameter)
            };
            let levels = superstable.len() - 1;
            let rows = superstable.iter().enumerate().map(|(k, ck)| {
                let ratio = k.checked_sub(2).and_then(|i| gap_ratios.get(i)).map(|r| num(*r));
                vec![k.to_string(), (1u64 << k).to_string(), num(*ck), ratio.unwrap_or_default()]
            });
            Ok(Outputs {
                csv: Some(csv_table(&["k", "period", "superstable", "gap_ratio"], rows)?),
                json: Some(json!({
                    "kind": "doubling",
                    "parameter": c,
                    "levels": levels,
                    "superstable": superstable,
                    "gap_ratios": gap_ratios,
                })),
                summary: format!("doubling limit ({levels} doublings): c = {}", num(c)),
                ..Outputs::default()
            })
        }
        ParamKind::Fibonacci => {
            let ell = Extended::from(s.ell);
            let a = find_fibonacci_parameter(ell, s.depth, Extended::from(0.0))?;
            let map = RealUnimodalMap::new(ell, a)?;
            let bound = fibonacci_bound(s.depth);
            let returns = closest_returns(&map, bound);
            let rows = returns.iter().map(|t| vec![t.to_string()]);
            Ok(Outputs {
                csv: Some(csv_table(&["closest_return"], rows)?),
                json: Some(json!({
                    "kind": "fibonacci",
                    "ell": s.ell,
                    "parameter": a.as_f64(),
                    "parameter_lo": a.lo(),
                    "closest_returns": returns,
                })),
                summary: format!("fibonacci parameter (ell = {}): a = {}; closest returns {:?}", s.ell, num(a.as_f64()), returns),
                ..Outputs::default()
            })
        }
    }
}

fn doubling_limit<T: Real>(s: &FindParamSettings, tol: T) -> Result<DoublingLimit<T>, CliError> {
    Ok(match s.levels {
        Some(k) => doubling_limit_at_depth::<T>(s.degree, k)?,
        None => find_doubling_limit::<T>(s.degree, tol)?,
    })
}

fn to_f64<T: Real>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}

/// The `depth`-th term of `1, 2, 3, 5, …`.
fn fibonacci_bound(depth: usize) -> usize {
    let (mut a, mut b) = (1usize, 2usize);
    for _ in 1..depth {
        (a, b) = (b, a + b);
    }
    a
}

#[derive(Debug, Args, Serialize)]
pub struct FixedPointFlags {
    #[arg(long)]
    pub degree: Option<u32>,
    /// Truncation degree of the power series.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSettings {
    pub degree: u32,
    pub order: usize,
    pub tol: f64,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { degree: 2, order: 20, tol: 1e-10 }
    }
}

pub fn solve_fixedpoint(s: &FixedPointSettings) -> Result<Outputs, CliError> {
    let sol = solve_cvitanovic::<f64>(s.degree, s.order, s.tol)?;
    let rows = sol.coeffs.iter().enumerate().map(|(i, a)| vec![((i + 1) * s.degree as usize).to_string(), num(*a)]);
    Ok(Outputs {
        csv: Some(csv_table(&["power", "coefficient"], rows)?),
        json: Some(json!({
            "degree": sol.degree,
            "order": sol.order,
            "alpha": sol.alpha,
            "dilation": sol.dilation(),
            "residual": sol.residual,
            "coeffs": sol.coeffs,
        })),
        summary: format!(
            "fixed point (d = {}, order {}): alpha = {}, residual = {:.3e}",
            sol.degree,
            sol.order,
            num(sol.alpha),
            sol.residual
        ),
        ..Outputs::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_bounds() {
        assert_eq!((1..=7).map(fibonacci_bound).collect::<Vec<_>>(), [1, 2, 3, 5, 8, 13, 21]);
    }

    #[test]
    fn period_two_by_cascade() {
        let s = FindParamSettings { kind: ParamKind::Superstable, ..Default::default() };
        let out = find_param(&s).unwrap();
        assert_eq!(out.json.unwrap()["parameter"], -1.0);
        let odd = FindParamSettings { kind: ParamKind::Superstable, period: 3, ..Default::default() };
        assert!(matches!(find_param(&odd), Err(CliError::Usage(_))));
    }
}
