//! Quadratic bounds on the scaling of the return-map measure, and the
//! Lean / Balanced / Black-hole classifier on the sequences `(η_m, ξ_m)`.
//!
//! `P` bounds `ω_m` from above given the level statistics; `Q_δ` bounds it
//! from below. Both are quadratics `x ↦ a + b x + c x²` and the interesting
//! quantity is their smallest positive fixed point.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{fit_line, LinearFit};
use crate::stats::LevelStats;

/// Calibration used when none is supplied.
pub const DEFAULT_CALIBRATION: f64 = 10.0;
/// Calibrations over which verdict stability is reported.
pub const STABILITY_CALIBRATIONS: [f64; 3] = [3.0, 10.0, 30.0];
/// Minimum R² for a fit to count as a law.
pub const MIN_R2: f64 = 0.9;
/// An exponential fit must decay at least this fast per level.
pub const MAX_DECAY_RATE: f64 = -0.1;
/// Consistency ratios outside `[1/RATIO_BAND, RATIO_BAND]` are flagged.
pub const RATIO_BAND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    P,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBound {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub provenance: Provenance,
    pub delta: f64,
    pub calibration_c: f64,
    /// Set when the linear coefficient was clamped up to 0.
    pub clamped: bool,
}

impl QuadraticBound {
    pub fn eval(&self, x: f64) -> f64 {
        self.a + x * (self.b + x * self.c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.b + 2.0 * self.c * x
    }

    /// `a = c = 0, b = 1`: every point is fixed.
    pub fn is_identity(&self) -> bool {
        self.a == 0.0 && self.b == 1.0 && self.c == 0.0
    }
}

/// Smallest `x > 0` with `q(x) = x`. The identity has no distinguished fixed
/// point and yields `None`, as does a polynomial without positive fixed points.
pub fn smallest_positive_fixed_point(q: &QuadraticBound) -> Option<f64> {
    let (a, b, c) = (q.a, q.b - 1.0, q.c);
    if c == 0.0 {
        if b == 0.0 {
            return None;
        }
        let x = -a / b;
        return (x > 0.0).then_some(x);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // Cancellation-free pair of roots.
    let s = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = [s / c, if s != 0.0 { a / s } else { f64::NAN }];
    roots.sort_by(f64::total_cmp);
    roots.into_iter().find(|x| *x > 0.0)
}

fn check_inputs(values: &[(&str, f64)], calibration_c: f64) -> Result<()> {
    for (name, v) in values {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !(calibration_c >= 1.0) || !calibration_c.is_finite() {
        return Err(Error::Domain(format!("calibration must be at least 1, got {calibration_c}")));
    }
    Ok(())
}

/// `P(x) = Cη/ρ + (1 − (η+ξ)/C + Cηξ) x + Cξρ x²`.
pub fn build_p(eta: f64, xi: f64, rho: f64, calibration_c: f64) -> Result<QuadraticBound> {
    check_inputs(&[("eta", eta), ("xi", xi), ("rho", rho)], calibration_c)?;
    if rho == 0.0 {
        return Err(Error::Degenerate("rho vanishes".into()));
    }
    let k = calibration_c;
    let raw_b = 1.0 - (eta + xi) / k + k * eta * xi;
    Ok(QuadraticBound {
        a: k * eta / rho,
        b: raw_b.max(0.0),
        c: k * xi * rho,
        provenance: Provenance::P,
        delta: 2.0,
        calibration_c: k,
        clamped: raw_b < 0.0,
    })
}

/// `Q_δ(x) = τ^{2−δ}η/(Cρ) + (max{1 − C(η+ξ), 0} + (τυ)^{2−δ}ηξ/C) x + C υ^{2−δ} ξρ x²`.
#[allow(clippy::too_many_arguments)]
pub fn build_q(
    eta: f64,
    xi: f64,
    rho: f64,
    tau: f64,
    upsilon: f64,
    delta: f64,
    calibration_c: f64,
) -> Result<QuadraticBound> {
    check_inputs(&[("eta", eta), ("xi", xi), ("rho", rho)], calibration_c)?;
    if !(tau > 0.0 && upsilon > 0.0) || !(delta <= 2.0) {
        return Err(Error::Domain(format!("need tau, upsilon > 0 and delta <= 2, got {tau}, {upsilon}, {delta}")));
    }
    if rho == 0.0 {
        return Err(Error::Degenerate("rho vanishes".into()));
    }
    let k = calibration_c;
    let e = 2.0 - delta;
    let linear = 1.0 - k * (eta + xi);
    Ok(QuadraticBound {
        a: tau.powf(e) * eta / (k * rho),
        b: linear.max(0.0) + (tau * upsilon).powf(e) * eta * xi / k,
        c: k * upsilon.powf(e) * xi * rho,
        provenance: Provenance::Q,
        delta,
        calibration_c: k,
        clamped: linear < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Lean,
    Balanced,
    BlackHole,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyVerdict {
    pub class: Regime,
    /// `log η_m` against `m`; the slope is the decay rate.
    pub eta_fit: LinearFit,
    pub xi_fit: LinearFit,
    pub inverse_eta_slope: LinearFit,
    pub ratio_log: Vec<f64>,
    /// Mean of `ratio_log` over the fit window; negative on the Lean side,
    /// positive on the Black-hole side.
    pub tilt: f64,
    pub calibration_c: f64,
    pub notes: Vec<String>,
}

/// `η_m < ξ_m / C`.
pub fn lean_trigger(eta: f64, xi: f64, calibration_c: f64) -> bool {
    eta < xi / calibration_c
}

/// `η_m > C ξ_m`.
pub fn black_hole_trigger(eta: f64, xi: f64, calibration_c: f64) -> bool {
    eta > calibration_c * xi
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn bounded_below(v: &[f64]) -> bool {
    v.iter().copied().fold(f64::INFINITY, f64::min) >= 0.5 * median(v)
}

fn decays_exponentially(fit: &LinearFit) -> bool {
    fit.r2 >= MIN_R2 && fit.slope < MAX_DECAY_RATE
}

/// Classifies `(η_m, ξ_m)` for `m = 1, 2, …`. Fits skip `m = 1`.
pub fn classify(eta: &[f64], xi: &[f64], calibration_c: f64) -> Result<TrichotomyVerdict> {
    if eta.len() != xi.len() || eta.len() < 4 {
        return Err(Error::Domain(format!(
            "need equal-length sequences of length >= 4, got {} and {}",
            eta.len(),
            xi.len()
        )));
    }
    if let Some(v) = eta.iter().chain(xi).find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!("sequence entries must lie in (0, 1], found {v}")));
    }
    if !(calibration_c > 1.0) {
        return Err(Error::Domain(format!("calibration must exceed 1, got {calibration_c}")));
    }
    let m: Vec<f64> = (2..=eta.len()).map(|k| k as f64).collect();
    let log_eta: Vec<f64> = eta[1..].iter().map(|v| v.ln()).collect();
    let log_xi: Vec<f64> = xi[1..].iter().map(|v| v.ln()).collect();
    let inv_eta: Vec<f64> = eta[1..].iter().map(|v| 1.0 / v).collect();
    let eta_fit = fit_line(&m, &log_eta)?;
    let xi_fit = fit_line(&m, &log_xi)?;
    let inverse_eta_slope = fit_line(&m, &inv_eta)?;
    let ratio_log: Vec<f64> = eta.iter().zip(xi).map(|(e, x)| (e / x).ln()).collect();
    let tilt = ratio_log[1..].iter().sum::<f64>() / (ratio_log.len() - 1) as f64;

    let mut notes = Vec::new();
    let lean_at = eta.iter().zip(xi).position(|(e, x)| lean_trigger(*e, *x, calibration_c));
    let hole_at = eta.iter().zip(xi).position(|(e, x)| black_hole_trigger(*e, *x, calibration_c));
    let lean = lean_at.is_some() && decays_exponentially(&eta_fit) && bounded_below(xi);
    let hole = hole_at.is_some() && decays_exponentially(&xi_fit) && bounded_below(eta);
    let band = ratio_log.iter().all(|r| r.abs() <= calibration_c.ln());
    let balanced = band && inverse_eta_slope.r2 >= MIN_R2 && inverse_eta_slope.slope > 0.0;
    if let Some(k) = lean_at {
        notes.push(format!("lean trigger first fires at m = {}", k + 1));
    }
    if let Some(k) = hole_at {
        notes.push(format!("black-hole trigger first fires at m = {}", k + 1));
    }
    let class = match (lean, hole, balanced) {
        (true, false, _) => Regime::Lean,
        (false, true, _) => Regime::BlackHole,
        (false, false, true) => Regime::Balanced,
        (true, true, _) => {
            notes.push("both one-sided rules accepted; refusing to choose".into());
            Regime::Inconclusive
        }
        (false, false, false) => Regime::Inconclusive,
    };
    Ok(TrichotomyVerdict { class, eta_fit, xi_fit, inverse_eta_slope, ratio_log, tilt, calibration_c, notes })
}

/// Verdicts for each calibration in [`STABILITY_CALIBRATIONS`].
pub fn classify_stability(eta: &[f64], xi: &[f64]) -> Result<Vec<TrichotomyVerdict>> {
    STABILITY_CALIBRATIONS.iter().map(|&k| classify(eta, xi, k)).collect()
}

impl TrichotomyVerdict {
    /// One-page plain-text summary.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verdict: {:?} (C = {})", self.class, self.calibration_c);
        let _ = writeln!(s, "tilt: {:+.6}", self.tilt);
        let _ = writeln!(s, "log eta fit: rate {:.6} R2 {:.4}", self.eta_fit.slope, self.eta_fit.r2);
        let _ = writeln!(s, "log xi fit:  rate {:.6} R2 {:.4}", self.xi_fit.slope, self.xi_fit.r2);
        let _ = writeln!(
            s,
            "1/eta fit:   slope {:.6} R2 {:.4}",
            self.inverse_eta_slope.slope, self.inverse_eta_slope.r2
        );
        let _ = writeln!(s, "m  log(eta/xi)");
        for (k, r) in self.ratio_log.iter().enumerate() {
            let _ = writeln!(s, "{:<2} {r:+.6}", k + 1);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// The level statistics the consistency report needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelTriple {
    pub m: usize,
    pub eta: f64,
    pub xi: f64,
    pub rho: f64,
}

impl TryFrom<&LevelStats> for LevelTriple {
    type Error = Error;

    fn try_from(s: &LevelStats) -> Result<Self> {
        let rho = s.rho.ok_or_else(|| Error::Pair(format!("no rho at level {}", s.m)))?;
        Ok(Self { m: s.m, eta: s.eta.value, xi: s.xi.value, rho: rho.value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaRow {
    pub m: usize,
    pub omega: f64,
    /// `ω_m ξ_m ρ_m / η_m`.
    pub lower_ratio: f64,
    /// `ω_{2m} / ω_m²` when level `2m` is present.
    pub square_ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub rows: Vec<OmegaRow>,
    pub flagged: usize,
}

fn out_of_band(r: f64) -> bool {
    !(1.0 / RATIO_BAND..=RATIO_BAND).contains(&r)
}

/// Tabulates the two consistency ratios of measured `ω_m(2)` against the
/// level statistics.
pub fn omega_consistency_report(stats: &[LevelTriple], omega2: &[(usize, f64)]) -> Result<OmegaReport> {
    let omega_at = |m: usize| omega2.iter().find(|(k, _)| *k == m).map(|(_, w)| *w);
    let mut rows = Vec::with_capacity(stats.len());
    for s in stats {
        let omega = omega_at(s.m).ok_or_else(|| Error::Pair(format!("no omega estimate at level {}", s.m)))?;
        if s.eta == 0.0 {
            return Err(Error::Degenerate(format!("eta vanishes at level {}", s.m)));
        }
        let lower_ratio = omega * s.xi * s.rho / s.eta;
        let square_ratio = omega_at(2 * s.m).map(|w2| w2 / (omega * omega));
        let flagged = out_of_band(lower_ratio) || square_ratio.is_some_and(out_of_band);
        rows.push(OmegaRow { m: s.m, omega, lower_ratio, square_ratio, flagged });
    }
    if !rows.iter().any(|r| r.square_ratio.is_some()) {
        return Err(Error::Pair("no doubling pair (m, 2m) among the omega estimates".into()));
    }
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(OmegaReport { rows, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub theta: f64,
    pub r2: f64,
}

/// `θ = exp(slope)` of `log(η_m ξ_m / (η_m + ξ_m)²)` against `m = 1, 2, …`.
pub fn theta_bound_fit(eta: &[f64], xi: &[f64]) -> Result<ThetaFit> {
    if eta.len() != xi.len() || eta.len() < 4 {
        return Err(Error::InsufficientData { usable: eta.len().min(xi.len()), needed: 4 });
    }
    let m: Vec<f64> = (1..=eta.len()).map(|k| k as f64).collect();
    let y: Vec<f64> = eta.iter().zip(xi).map(|(e, x)| (e * x / (e + x).powi(2)).ln()).collect();
    let fit = fit_line(&m, &y)?;
    Ok(ThetaFit { theta: fit.slope.exp(), r2: fit.r2 })
}
