//! Monte Carlo area ratios of a level system.
//!
//! With `f_m` the level-`m` return map, `U^m ⊂ V^m` its domain and
//! `A^n = V^n \ U^n`:
//!
//! * `η_{m,n}`: share of `U^m` whose `f_m`-orbit lands in `V^n`;
//! * `ξ_{m,n}`: share of `A^n` whose `f_m`-orbit never comes back to `V^n`;
//! * `ρ_{m,n} = |U^n| / |U^m|`;
//! * `κ_{m,n}`: share of `A^m` whose `f`-orbit reaches `V^n` before coming
//!   back to `A^m`;
//! * `τ_{m,n}`, `υ_{m,n}`: smallest sampled `|Df_m^k|` over first landings in
//!   `V^n` from `U^m \ V^n`, and over passages `A^n → A^m` that avoid both
//!   annuli in between.
//!
//! The estimators only see the [`LevelSystem`] trait, so the complex disk
//! nest and the real principal nest share them. Orbits that neither land nor
//! leave within the horizon are censored: they count as not landed / never
//! returned, and their share is reported.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{self, Estimate, Op, Z95};

/// Deepest level the single-pass `η` estimator can track.
pub const MAX_LEVELS: usize = 48;
/// Rejection-sampling budget per sample.
pub const MAX_ATTEMPTS: u32 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    InsideU,
    InAnnulus,
    OutsideV,
}

/// A nest of domains `V^0 ⊃ V^1 ⊃ …` with `U^n ⊂ V^n` and return maps `f_n`
/// defined on `U^n`.
pub trait LevelSystem: Sync {
    type Point: Copy + Send + Sync;

    /// Deepest level index.
    fn depth(&self) -> usize;
    fn region(&self, n: usize, x: Self::Point) -> Region;
    fn in_v(&self, n: usize, x: Self::Point) -> bool {
        self.region(n, x) != Region::OutsideV
    }
    fn in_u(&self, n: usize, x: Self::Point) -> bool {
        self.region(n, x) == Region::InsideU
    }
    /// One application of `f_m` together with `log |Df_m(x)|`.
    fn step(&self, m: usize, x: Self::Point) -> (Self::Point, f64);
    /// Uniform draw from the reference shape (unit disk or `[-1, 1]`).
    fn draw_unit(&self, rng: &mut ChaCha8Rng) -> [f64; 2];
    /// Affine image of a reference draw in `V^n`.
    fn from_unit(&self, n: usize, u: [f64; 2]) -> Self::Point;
    /// Lebesgue measure of `V^n`.
    fn v_measure(&self, n: usize) -> f64;
}

fn sample_where<S: LevelSystem>(
    sys: &S,
    n: usize,
    rng: &mut ChaCha8Rng,
    accept: impl Fn(S::Point) -> bool,
) -> Option<S::Point> {
    (0..MAX_ATTEMPTS).find_map(|_| {
        let x = sys.from_unit(n, sys.draw_unit(rng));
        accept(x).then_some(x)
    })
}

fn check_pair<S: LevelSystem>(sys: &S, m: usize, n: usize, samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    if m >= n {
        return Err(Error::Precondition(format!("need m < n, got m = {m}, n = {n}")));
    }
    if n > sys.depth() {
        return Err(Error::Precondition(format!("level {n} exceeds nest depth {}", sys.depth())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub samples: u64,
    pub seed: u64,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaProfile {
    pub m: usize,
    /// `η_{m,n}` for `n = m+1 ..= m + eta.len()`.
    pub eta: Vec<Estimate>,
    pub censored: Estimate,
}

impl EtaProfile {
    pub fn at(&self, n: usize) -> Option<&Estimate> {
        n.checked_sub(self.m + 1).and_then(|i| self.eta.get(i))
    }
}

#[derive(Clone, Copy)]
struct Histogram {
    deepest: [u64; MAX_LEVELS + 1],
    censored: u64,
    failed: u64,
}

impl Histogram {
    fn empty() -> Self {
        Self { deepest: [0; MAX_LEVELS + 1], censored: 0, failed: 0 }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.deepest.iter_mut().zip(other.deepest) {
            *a += b;
        }
        self.censored += other.censored;
        self.failed += other.failed;
        self
    }
}

/// `η_{m,n}` for every `n` in `m+1..=n_max` from one set of orbits.
///
/// Each orbit records the deepest `V^n` it visits, so the estimates are
/// exactly non-increasing in `n`.
pub fn estimate_eta_profile<S: LevelSystem>(sys: &S, m: usize, n_max: usize, cfg: Sampling) -> Result<EtaProfile> {
    check_pair(sys, m, n_max, cfg.samples)?;
    if n_max - m > MAX_LEVELS {
        return Err(Error::Precondition(format!("at most {MAX_LEVELS} levels per profile")));
    }
    let deepest_v = |x: S::Point| (m + 1..=n_max).take_while(|&n| sys.in_v(n, x)).last().unwrap_or(m) - m;
    let hist = sampling::par_fold(
        cfg.seed,
        Op::Eta,
        cfg.samples,
        Histogram::empty(),
        |_, rng| {
            let mut h = Histogram::empty();
            let Some(mut x) = sample_where(sys, m, rng, |x| sys.in_u(m, x)) else {
                h.failed = 1;
                return h;
            };
            let mut best = 0;
            let mut k = 0;
            loop {
                best = best.max(deepest_v(x));
                if best == n_max - m || !sys.in_u(m, x) {
                    break;
                }
                if k == cfg.horizon {
                    h.censored = 1;
                    break;
                }
                x = sys.step(m, x).0;
                k += 1;
            }
            h.deepest[best] = 1;
            h
        },
        Histogram::merge,
    );
    if hist.failed > 0 {
        return Err(Error::DegenerateArea { level: m });
    }
    let n_total = cfg.samples;
    let eta = (1..=n_max - m)
        .map(|j| Estimate::proportion(hist.deepest[j..].iter().sum(), n_total))
        .collect();
    Ok(EtaProfile { m, eta, censored: Estimate::proportion(hist.censored, n_total) })
}

pub fn estimate_eta<S: LevelSystem>(sys: &S, m: usize, n: usize, cfg: Sampling) -> Result<Estimate> {
    Ok(estimate_eta_profile(sys, m, n, cfg)?.eta[n - m - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub xi: Estimate,
    /// Share of samples still undecided at the horizon (included in `xi`).
    pub censored: Estimate,
}

/// `ξ_{m,n}`: samples uniform on `A^n`, iterated by `f_m` while in `U^m`.
pub fn estimate_xi<S: LevelSystem>(sys: &S, m: usize, n: usize, cfg: Sampling) -> Result<XiEstimate> {
    check_pair(sys, m, n, cfg.samples)?;
    // (never returned, censored, failed)
    let (never, censored, failed) = sampling::par_fold(
        cfg.seed,
        Op::Xi,
        cfg.samples,
        (0u64, 0u64, 0u64),
        |_, rng| {
            let Some(mut x) = sample_where(sys, n, rng, |x| sys.region(n, x) == Region::InAnnulus) else {
                return (0, 0, 1);
            };
            for _ in 0..cfg.horizon {
                if !sys.in_u(m, x) {
                    return (1, 0, 0);
                }
                x = sys.step(m, x).0;
                if sys.in_v(n, x) {
                    return (0, 0, 0);
                }
            }
            (1, (cfg.horizon > 0) as u64, 0)
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    if failed > 0 {
        return Err(Error::DegenerateArea { level: n });
    }
    Ok(XiEstimate {
        xi: Estimate::proportion(never, cfg.samples),
        censored: Estimate::proportion(censored, cfg.samples),
    })
}

/// `ρ_{m,n} = |U^n| / |U^m|` from one set of reference draws mapped into
/// both `V^m` and `V^n`.
pub fn estimate_rho<S: LevelSystem>(sys: &S, m: usize, n: usize, samples: u64, seed: u64) -> Result<Estimate> {
    check_pair(sys, m, n, samples)?;
    let (hit_m, hit_n) = sampling::par_fold(
        seed,
        Op::Rho,
        samples,
        (0u64, 0u64),
        |_, rng| {
            let u = sys.draw_unit(rng);
            (sys.in_u(m, sys.from_unit(m, u)) as u64, sys.in_u(n, sys.from_unit(n, u)) as u64)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    if hit_m == 0 {
        return Err(Error::DegenerateArea { level: m });
    }
    let total = samples as f64;
    let scale = sys.v_measure(n) / sys.v_measure(m);
    let (p_m, p_n) = (hit_m as f64 / total, hit_n as f64 / total);
    let value = scale * p_n / p_m;
    if hit_n == 0 {
        let (_, hi) = sampling::wilson(0, samples);
        return Ok(Estimate { value, ci_low: 0.0, ci_high: scale * hi / p_m, n_samples: samples });
    }
    let var = (1.0 - p_m) / (total * p_m) + (1.0 - p_n) / (total * p_n);
    let spread = (Z95 * var.sqrt()).exp();
    Ok(Estimate { value, ci_low: value / spread, ci_high: value * spread, n_samples: samples })
}

/// `κ_{m,n}`: samples uniform on `A^m`, iterated by the level-0 map while in
/// `U^0`; an orbit belongs to `Z_{m,n}` unless it comes back to `A^m`
/// before entering `V^n`.
pub fn estimate_kappa<S: LevelSystem>(sys: &S, m: usize, n: usize, cfg: Sampling) -> Result<Estimate> {
    check_pair(sys, m, n, cfg.samples)?;
    let (in_z, failed) = sampling::par_fold(
        cfg.seed,
        Op::Kappa,
        cfg.samples,
        (0u64, 0u64),
        |_, rng| {
            let Some(mut x) = sample_where(sys, m, rng, |x| sys.region(m, x) == Region::InAnnulus) else {
                return (0, 1);
            };
            for _ in 0..cfg.horizon {
                if !sys.in_u(0, x) {
                    return (1, 0);
                }
                x = sys.step(0, x).0;
                if sys.in_v(n, x) {
                    return (1, 0);
                }
                if sys.region(m, x) == Region::InAnnulus {
                    return (0, 0);
                }
            }
            (1, 0)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    if failed > 0 {
        return Err(Error::DegenerateArea { level: m });
    }
    Ok(Estimate::proportion(in_z, cfg.samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauUpsilon {
    /// Sampled minima; upper bounds for the true infima.
    pub tau_min: Option<f64>,
    pub upsilon_min: Option<f64>,
    pub tau_events: u64,
    pub upsilon_events: u64,
}

impl TauUpsilon {
    pub fn product(&self) -> Option<f64> {
        Some(self.tau_min? * self.upsilon_min?)
    }
}

/// Empirical `τ_{m,n}` and `υ_{m,n}`; errors only when neither kind of
/// event was observed.
pub fn estimate_tau_upsilon<S: LevelSystem>(sys: &S, m: usize, n: usize, cfg: Sampling) -> Result<TauUpsilon> {
    check_pair(sys, m, n, cfg.samples)?;
    let fold = |a: (u64, f64), b: (u64, f64)| (a.0 + b.0, a.1.min(b.1));
    let (tau_events, tau_log) = sampling::par_fold(
        cfg.seed,
        Op::TauUpsilon,
        cfg.samples,
        (0u64, f64::INFINITY),
        |_, rng| {
            let Some(mut x) = sample_where(sys, m, rng, |x| sys.in_u(m, x) && !sys.in_v(n, x)) else {
                return (0, f64::INFINITY);
            };
            let mut log_d = 0.0;
            for _ in 0..cfg.horizon {
                if !sys.in_u(m, x) {
                    break;
                }
                let (y, l) = sys.step(m, x);
                log_d += l;
                x = y;
                if sys.in_v(n, x) {
                    return (1, log_d);
                }
            }
            (0, f64::INFINITY)
        },
        fold,
    );
    let (upsilon_events, upsilon_log) = sampling::par_fold(
        cfg.seed ^ 0x5555_5555_5555_5555,
        Op::TauUpsilon,
        cfg.samples,
        (0u64, f64::INFINITY),
        |_, rng| {
            let Some(mut x) = sample_where(sys, n, rng, |x| sys.region(n, x) == Region::InAnnulus) else {
                return (0, f64::INFINITY);
            };
            let mut log_d = 0.0;
            for _ in 0..cfg.horizon {
                if !sys.in_u(m, x) {
                    break;
                }
                let (y, l) = sys.step(m, x);
                log_d += l;
                x = y;
                if sys.region(m, x) == Region::InAnnulus {
                    return (1, log_d);
                }
                if sys.region(n, x) == Region::InAnnulus {
                    break;
                }
            }
            (0, f64::INFINITY)
        },
        fold,
    );
    if tau_events == 0 && upsilon_events == 0 {
        return Err(Error::NoEvent("tau/upsilon"));
    }
    Ok(TauUpsilon {
        tau_min: (tau_events > 0).then(|| tau_log.exp()),
        upsilon_min: (upsilon_events > 0).then(|| upsilon_log.exp()),
        tau_events,
        upsilon_events,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub m: usize,
    pub n: usize,
    pub eta: Estimate,
    pub xi: Estimate,
    pub xi_censored: Estimate,
    pub rho: Option<Estimate>,
    pub kappa: Option<Estimate>,
    pub tau_min: Option<f64>,
    pub upsilon_min: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    pub horizon: u64,
}

/// All estimators for `n = m+1 ..= n_max`.
pub fn level_stats<S: LevelSystem>(sys: &S, m: usize, n_max: usize, cfg: Sampling) -> Result<Vec<LevelStats>> {
    let eta = estimate_eta_profile(sys, m, n_max, cfg)?;
    (m + 1..=n_max)
        .map(|n| {
            let xi = estimate_xi(sys, m, n, cfg)?;
            let rho = estimate_rho(sys, m, n, cfg.samples, cfg.seed).ok();
            let kappa = estimate_kappa(sys, m, n, cfg).ok();
            let tu = estimate_tau_upsilon(sys, m, n, cfg).ok();
            Ok(LevelStats {
                m,
                n,
                eta: eta.eta[n - m - 1],
                xi: xi.xi,
                xi_censored: xi.censored,
                rho,
                kappa,
                tau_min: tu.and_then(|t| t.tau_min),
                upsilon_min: tu.and_then(|t| t.upsilon_min),
                samples: cfg.samples,
                seed: cfg.seed,
                horizon: cfg.horizon,
            })
        })
        .collect()
}

/// Only `η` and `ξ`, which is all the exponential-decay check needs.
pub fn eta_xi_stats<S: LevelSystem>(sys: &S, m: usize, n_max: usize, cfg: Sampling) -> Result<Vec<LevelStats>> {
    let eta = estimate_eta_profile(sys, m, n_max, cfg)?;
    (m + 1..=n_max)
        .map(|n| {
            let xi = estimate_xi(sys, m, n, cfg)?;
            Ok(LevelStats {
                m,
                n,
                eta: eta.eta[n - m - 1],
                xi: xi.xi,
                xi_censored: xi.censored,
                rho: None,
                kappa: None,
                tau_min: None,
                upsilon_min: None,
                samples: cfg.samples,
                seed: cfg.seed,
                horizon: cfg.horizon,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpLemmaRow {
    pub n: usize,
    /// `η_{m,n+1} / η_{m,n}`.
    pub ratio: f64,
    /// Smallest `C` with `ratio ≤ 1 - ξ/C` (within CI slack).
    pub c_upper: f64,
    /// Smallest `C_0` with `max(1/C_0, 1 - C_0 ξ) ≤ ratio` (within CI slack).
    pub c_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpLemmaReport {
    pub m: usize,
    pub rows: Vec<ExpLemmaRow>,
    /// Smallest single constant (at least 1) meeting every row.
    pub constant: f64,
    pub feasible: bool,
}

/// Largest constant accepted as "bounded".
pub const EXP_LEMMA_MAX_C: f64 = 100.0;

fn ratio_over(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Checks the two-sided exponential-decay bound on consecutive `η` ratios.
///
/// Each bound is evaluated at the CI endpoints most favourable to it. Rows
/// where `ξ` vanishes and `η` is constant place no constraint.
pub fn verify_exp_lemma(stats: &[LevelStats]) -> Result<ExpLemmaReport> {
    if stats.len() < 3 {
        return Err(Error::InsufficientData { usable: stats.len(), needed: 3 });
    }
    let m = stats[0].m;
    if stats.iter().any(|s| s.m != m) || stats.windows(2).any(|w| w[1].n != w[0].n + 1) {
        return Err(Error::Pair("statistics must share m and have consecutive n".into()));
    }
    let rows: Vec<ExpLemmaRow> = stats
        .windows(2)
        .map(|w| {
            let (cur, next) = (&w[0], &w[1]);
            let ratio = ratio_over(next.eta.value, cur.eta.value);
            let q_low = ratio_over(next.eta.ci_low, cur.eta.ci_high).min(ratio);
            let q_high = ratio_over(next.eta.ci_high, cur.eta.ci_low).max(ratio);
            let xi_low = cur.xi.ci_low.min(cur.xi.value);
            let xi_high = cur.xi.ci_high.max(cur.xi.value);
            let c_upper = if xi_low == 0.0 {
                0.0
            } else if q_low >= 1.0 {
                f64::INFINITY
            } else {
                xi_low / (1.0 - q_low)
            };
            let q = q_high.min(1.0);
            let from_floor = if q > 0.0 { 1.0 / q } else { f64::INFINITY };
            let from_slope = if q >= 1.0 {
                0.0
            } else if xi_high > 0.0 {
                (1.0 - q) / xi_high
            } else {
                f64::INFINITY
            };
            ExpLemmaRow { n: cur.n, ratio, c_upper, c_lower: from_floor.max(from_slope) }
        })
        .collect();
    let constant = rows.iter().fold(1.0f64, |c, r| c.max(r.c_upper).max(r.c_lower));
    Ok(ExpLemmaReport { m, rows, constant, feasible: constant <= EXP_LEMMA_MAX_C })
}
