//! Real unimodal maps `f(x) = a − |x|^ℓ` with Fibonacci combinatorics and
//! their principal nests.
//!
//! The Fibonacci parameter is found by bisection in the kneading order. The
//! principal nest `I^0 ⊃ I^1 ⊃ …` is obtained by pulling `I^n` back along the
//! critical orbit up to its first return, which needs about 32 digits past
//! level 9 at `ℓ = 2`; the code is generic so [`twofloat::TwoFloat`] can be
//! used there.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{self, Estimate, Op};
use crate::scalar::Real;
use crate::stats::{self, LevelStats, LevelSystem, Region, Sampling};

/// Width ratio separating bounded from decaying geometry.
pub const BOUNDED_RATIO: f64 = 0.05;
/// Longest critical orbit followed when looking for a return.
pub const MAX_RETURN_TIME: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealUnimodalMap<T> {
    ell: T,
    a: T,
}

impl<T: Real> RealUnimodalMap<T> {
    /// `a` must lie in `(0, 2^{1/(ℓ−1)}]` so the core `[f(a), a]` is invariant.
    pub fn new(ell: T, a: T) -> Result<Self> {
        if !(ell > T::one()) {
            return Err(Error::Domain(format!("criticality must exceed 1, got {ell}")));
        }
        let top = full_parameter(ell);
        if !(a > T::zero() && a <= top * (T::one() + T::unit_roundoff())) {
            return Err(Error::Domain(format!("parameter {a} outside (0, {top}]")));
        }
        Ok(Self { ell, a })
    }

    pub fn ell(&self) -> T {
        self.ell
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn eval(&self, x: T) -> T {
        self.a - x.abs_pow(self.ell)
    }

    /// `log |f'(x)| = log ℓ + (ℓ−1) log |x|`.
    pub fn log_deriv(&self, x: T) -> T {
        self.ell.ln() + (self.ell - T::one()) * x.abs().ln()
    }

    pub fn core_interval(&self) -> (T, T) {
        (self.eval(self.a), self.a)
    }

    /// The orientation-reversing fixed point `α > 0`.
    pub fn fixed_point(&self) -> T {
        let (mut lo, mut hi) = (T::zero(), self.a);
        loop {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.eval(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// `0, f(0), …, f^len(0)`.
    pub fn critical_orbit(&self, len: usize) -> Vec<T> {
        let mut orbit = Vec::with_capacity(len + 1);
        let mut x = T::zero();
        orbit.push(x);
        for _ in 0..len {
            x = self.eval(x);
            orbit.push(x);
        }
        orbit
    }

    /// `|x|^{1/ℓ}` polished by one Newton step, so the result is as accurate
    /// as the scalar type allows.
    fn root(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let y = x.powf(self.ell.recip());
        let yl = y.abs_pow(self.ell);
        y - (yl - x) * y / (self.ell * yl)
    }
}

/// The parameter of the full map, `f(a) = −a`.
fn full_parameter<T: Real>(ell: T) -> T {
    T::lit(2.0).powf((ell - T::one()).recip())
}

/// Fibonacci numbers `1, 2, 3, 5, …` up to the first one exceeding `bound`.
fn fibonacci_times(bound: usize) -> Vec<usize> {
    let mut s = vec![1usize, 2];
    while *s.last().unwrap() <= bound {
        let k = s.len();
        s.push(s[k - 1] + s[k - 2]);
    }
    s
}

/// Signs of `f^1(0), …, f^len(0)` (`true` for positive) of the Fibonacci
/// kneading sequence.
pub fn fibonacci_kneading(len: usize) -> Vec<bool> {
    let s = fibonacci_times(len + 2);
    let mut nu = vec![false; s.last().unwrap() + 1];
    nu[1] = true;
    for k in 1..s.len() {
        let sq = s[k.saturating_sub(2)];
        for j in 1..sq {
            nu[s[k - 1] + j] = nu[j];
        }
        nu[s[k]] = !nu[sq];
    }
    nu[1..=len].to_vec()
}

/// Signs of the critical orbit; stops with `None` at an exact hit of 0.
pub fn itinerary<T: Real>(map: &RealUnimodalMap<T>, len: usize) -> Vec<Option<bool>> {
    let mut out = Vec::with_capacity(len);
    let mut x = T::zero();
    for _ in 0..len {
        x = map.eval(x);
        if x == T::zero() {
            out.push(None);
            break;
        }
        out.push(Some(x > T::zero()));
    }
    out
}

/// Kneading order of an itinerary against a reference sequence; `Less`
/// means the parameter lies below the one realising `target`.
pub fn kneading_cmp(itin: &[Option<bool>], target: &[bool]) -> Ordering {
    // Positive symbols reverse orientation.
    let mut flipped = false;
    for (u, &v) in itin.iter().zip(target) {
        let u_rank = match u {
            Some(true) => 2,
            None => 1,
            Some(false) => 0,
        };
        let v_rank = if v { 2 } else { 0 };
        if u_rank != v_rank {
            let ord = u_rank.cmp(&v_rank);
            return if flipped { ord.reverse() } else { ord };
        }
        flipped ^= v;
    }
    Ordering::Equal
}

/// Kneading length used for `depth` enforced returns.
fn kneading_length(depth: usize) -> usize {
    let s = fibonacci_times(usize::MAX / 4);
    s[(depth + 6).min(s.len() - 1)]
}

/// Times `s ≥ 1` at which `|f^s(0)|` is smaller than at every earlier time.
pub fn closest_returns<T: Real>(map: &RealUnimodalMap<T>, max_time: usize) -> Vec<usize> {
    let mut best = T::infinity();
    let mut out = Vec::new();
    let mut x = T::zero();
    for s in 1..=max_time {
        x = map.eval(x);
        if x.abs() < best {
            best = x.abs();
            out.push(s);
        }
    }
    out
}

/// Parameter whose closest-return times are `1, 2, 3, 5, …` for `depth`
/// returns, by bisection to width `tol` (or until the scalar runs out).
pub fn find_fibonacci_parameter<T: Real>(ell: T, depth: usize, tol: T) -> Result<T> {
    if !(ell > T::one()) {
        return Err(Error::Domain(format!("criticality must exceed 1, got {ell}")));
    }
    if depth < 3 {
        return Err(Error::Precondition(format!("need at least 3 returns, got {depth}")));
    }
    let len = kneading_length(depth);
    let target = fibonacci_kneading(len);
    let order = |a: T| kneading_cmp(&itinerary(&RealUnimodalMap { ell, a }, len), &target);
    let (mut lo, mut hi) = (T::one(), full_parameter(ell));
    if order(lo) != Ordering::Less || order(hi) != Ordering::Greater {
        return Err(Error::Bracket { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        match order(mid) {
            Ordering::Less => lo = mid,
            Ordering::Greater => hi = mid,
            Ordering::Equal => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let a = (lo + hi) / T::lit(2.0);
    let map = RealUnimodalMap::new(ell, a)?;
    let expected = fibonacci_times(usize::MAX / 4);
    let got = closest_returns(&map, expected[depth - 1]);
    if got[..] != expected[..depth] {
        let level = got.iter().zip(&expected).take_while(|(g, e)| g == e).count();
        return Err(Error::Combinatorics { level, reason: format!("closest returns {got:?}") });
    }
    Ok(a)
}

/// `I^0 ⊃ I^1 ⊃ …`, all symmetric about 0, with the lateral return domains.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalNest<T> {
    pub map: RealUnimodalMap<T>,
    /// `I^n = [−h_n, h_n]` for `n = 0..=depth`.
    pub half_widths: Vec<T>,
    /// First return time of 0 to `I^n`, `n = 0..=depth`.
    pub return_times: Vec<usize>,
    /// Positive copy `[lo, hi]` of the lateral component `±I^n_1` of the
    /// first return domain of `I^n`, `n = 0..depth`.
    pub lateral: Vec<(T, T)>,
    /// Return time on `±I^n_1`.
    pub lateral_return_times: Vec<usize>,
}

impl<T: Real> PrincipalNest<T> {
    pub fn depth(&self) -> usize {
        self.half_widths.len() - 1
    }

    pub fn intervals(&self) -> Vec<(T, T)> {
        self.half_widths.iter().map(|&h| (-h, h)).collect()
    }

    /// `|I^{n+1}| / |I^n|`.
    pub fn ratios(&self) -> Vec<f64> {
        self.half_widths.windows(2).map(|w| (w[1] / w[0]).as_f64()).collect()
    }

    /// Gap between `I^{n+1}` and `I^n_1`, relative to `|I^n|`.
    pub fn gaps(&self) -> Vec<f64> {
        self.lateral
            .iter()
            .enumerate()
            .map(|(n, (lo, _))| ((*lo - self.half_widths[n + 1]) / (T::lit(2.0) * self.half_widths[n])).as_f64())
            .collect()
    }
}

/// Pulls `[u, v]` back along `orbit[to] ← … ← orbit[from]`, choosing at each
/// step the branch containing the orbit point.
fn pull_back<T: Real>(map: &RealUnimodalMap<T>, orbit: &[T], from: usize, to: usize, mut u: T, mut v: T) -> Option<(T, T)> {
    for j in (from..to).rev() {
        if v >= map.a || u > map.a {
            return None;
        }
        let (inner, outer) = (map.root(map.a - v), map.root(map.a - u));
        (u, v) = if orbit[j] > T::zero() { (inner, outer) } else { (-outer, -inner) };
    }
    Some((u, v))
}

/// Principal nest to `depth` levels; fails where the return times stop
/// following `r_{n+1} = r_n + r_{n−1}`.
pub fn build_principal_nest<T: Real>(map: &RealUnimodalMap<T>, depth: usize) -> Result<PrincipalNest<T>> {
    let mut orbit = map.critical_orbit(64);
    let mut half_widths = vec![map.fixed_point()];
    let mut return_times: Vec<usize> = Vec::with_capacity(depth + 1);
    let broken = |level: usize, reason: String| Error::Combinatorics { level, reason };
    for n in 0..=depth {
        let h = half_widths[n];
        let r = loop {
            if let Some(j) = (1..orbit.len()).find(|&j| orbit[j].abs() < h) {
                break j;
            }
            if orbit.len() > MAX_RETURN_TIME {
                return Err(broken(n, format!("no return to I^{n} within {MAX_RETURN_TIME} steps")));
            }
            let extra = map.critical_orbit(orbit.len());
            let last = *orbit.last().unwrap();
            // Continue from the last point rather than recomputing.
            let mut x = last;
            for _ in 1..extra.len() {
                x = map.eval(x);
                orbit.push(x);
            }
        };
        if n >= 2 && r != return_times[n - 1] + return_times[n - 2] {
            return Err(broken(n, format!("return time {r} after {:?}", &return_times[n - 2..])));
        }
        return_times.push(r);
        if n == depth {
            break;
        }
        // The last step lands on the critical value; its preimage is central.
        let (u, _) = pull_back(map, &orbit, 1, r, -h, h)
            .ok_or_else(|| broken(n, "pullback of the central domain hits the critical value".into()))?;
        let next = map.root(map.a - u);
        if !(next < h) {
            return Err(broken(n, "central domain does not shrink".into()));
        }
        half_widths.push(next);
    }
    let mut lateral = Vec::with_capacity(depth);
    let mut lateral_return_times = Vec::with_capacity(depth);
    for n in 0..depth {
        let (from, to) = (return_times[n], return_times[n + 1]);
        let h = half_widths[n];
        let (u, v) = pull_back(map, &orbit, from, to, -h, h)
            .ok_or_else(|| broken(n, "pullback of the lateral domain hits the critical value".into()))?;
        let (lo, hi) = if u > T::zero() { (u, v) } else { (-v, -u) };
        // At level 0 the two domains share an endpoint, a preimage of `α`.
        let slack = T::lit(64.0) * T::unit_roundoff() * h;
        if !(half_widths[n + 1] - lo <= slack && hi - h <= slack) {
            return Err(broken(n, "lateral domain overlaps the central one".into()));
        }
        lateral.push((lo, hi));
        lateral_return_times.push(to - from);
    }
    Ok(PrincipalNest { map: *map, half_widths, return_times, lateral, lateral_return_times })
}

/// A Fibonacci map of criticality `ell` with its principal nest to `depth`.
pub fn fibonacci_nest<T: Real>(ell: T, depth: usize) -> Result<PrincipalNest<T>> {
    let a = find_fibonacci_parameter(ell, depth + 4, T::zero())?;
    build_principal_nest(&RealUnimodalMap::new(ell, a)?, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryVerdict {
    Bounded,
    Decaying,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub ratios: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Levels `window_start..` enter the verdict.
    pub window_start: usize,
    pub min_ratio: f64,
    pub verdict: GeometryVerdict,
}

/// Verdict from the last half of the scaling ratios: bounded when none drops
/// below [`BOUNDED_RATIO`], decaying when they fall strictly and end below it.
pub fn geometry_from_ratios(ratios: &[f64], gaps: &[f64]) -> GeometryReport {
    let window_start = ratios.len() / 2;
    let window = &ratios[window_start..];
    let min_ratio = window.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if ratios.len() < 4 {
        GeometryVerdict::Undecided
    } else if min_ratio >= BOUNDED_RATIO {
        GeometryVerdict::Bounded
    } else if window.windows(2).all(|w| w[1] < w[0]) && *window.last().unwrap() < BOUNDED_RATIO {
        GeometryVerdict::Decaying
    } else {
        GeometryVerdict::Undecided
    };
    GeometryReport { ratios: ratios.to_vec(), gaps: gaps.to_vec(), window_start, min_ratio, verdict }
}

pub fn geometry_diagnostics<T: Real>(nest: &PrincipalNest<T>) -> GeometryReport {
    geometry_from_ratios(&nest.ratios(), &nest.gaps())
}

/// The principal nest as a [`LevelSystem`] in binary64: `V^n = I^n`,
/// `U^n = I^{n+1} ∪ ±I^n_1`, and `f_n` the first return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealNest {
    pub ell: f64,
    pub a: f64,
    pub half_widths: Vec<f64>,
    pub return_times: Vec<usize>,
    pub lateral: Vec<(f64, f64)>,
    pub lateral_return_times: Vec<usize>,
}

impl<T: Real> From<&PrincipalNest<T>> for RealNest {
    fn from(n: &PrincipalNest<T>) -> Self {
        Self {
            ell: n.map.ell.as_f64(),
            a: n.map.a.as_f64(),
            half_widths: n.half_widths.iter().map(|h| h.as_f64()).collect(),
            return_times: n.return_times.clone(),
            lateral: n.lateral.iter().map(|(l, h)| (l.as_f64(), h.as_f64())).collect(),
            lateral_return_times: n.lateral_return_times.clone(),
        }
    }
}

impl RealNest {
    fn iterate(&self, x: f64, times: usize) -> (f64, f64) {
        let mut x = x;
        let mut log_d = 0.0;
        for _ in 0..times {
            log_d += self.ell.ln() + (self.ell - 1.0) * x.abs().ln();
            x = self.a - x.abs().powf(self.ell);
        }
        (x, log_d)
    }

    fn in_lateral(&self, n: usize, x: f64) -> bool {
        let (lo, hi) = self.lateral[n];
        (lo..=hi).contains(&x.abs())
    }
}

impl LevelSystem for RealNest {
    type Point = f64;

    fn depth(&self) -> usize {
        self.lateral.len().saturating_sub(1)
    }

    fn region(&self, n: usize, x: f64) -> Region {
        if x.abs() <= self.half_widths[n + 1] || self.in_lateral(n, x) {
            Region::InsideU
        } else if x.abs() <= self.half_widths[n] {
            Region::InAnnulus
        } else {
            Region::OutsideV
        }
    }

    fn in_v(&self, n: usize, x: f64) -> bool {
        x.abs() <= self.half_widths[n]
    }

    fn step(&self, m: usize, x: f64) -> (f64, f64) {
        if x.abs() <= self.half_widths[m + 1] {
            self.iterate(x, self.return_times[m])
        } else {
            self.iterate(x, self.lateral_return_times[m])
        }
    }

    fn draw_unit(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [rng.random_range(-1.0..=1.0), 0.0]
    }

    fn from_unit(&self, n: usize, u: [f64; 2]) -> f64 {
        u[0] * self.half_widths[n]
    }

    fn v_measure(&self, n: usize) -> f64 {
        2.0 * self.half_widths[n]
    }
}

/// Length-based level statistics `η^r_{m,n}`, `ξ^r_{m,n}`, … on the nest.
pub fn real_escape_stats(nest: &RealNest, m: usize, n: usize, cfg: Sampling) -> Result<LevelStats> {
    let mut all = stats::level_stats(nest, m, n, cfg)?;
    Ok(all.pop().expect("n > m"))
}

/// Share of uniform points of `I^0` whose orbit visits `I^level` during the
/// second half of `iterates` steps.
pub fn typical_orbit_indicator(nest: &RealNest, level: usize, samples: u64, iterates: u64, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    if level >= nest.half_widths.len() {
        return Err(Error::Precondition(format!("level {level} exceeds nest depth {}", nest.half_widths.len() - 1)));
    }
    let target = nest.half_widths[level];
    let hits = sampling::par_fold(
        seed,
        Op::Custom,
        samples,
        0u64,
        |_, rng| {
            let mut x = rng.random_range(-1.0..=1.0) * nest.half_widths[0];
            for k in 0..iterates {
                x = nest.a - x.abs().powf(nest.ell);
                if 2 * k >= iterates && x.abs() <= target {
                    return 1;
                }
            }
            0
        },
        |a, b| a + b,
    );
    Ok(Estimate::proportion(hits, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use twofloat::TwoFloat;

    const FIB: [usize; 7] = [1, 2, 3, 5, 8, 13, 21];

    #[test]
    fn rejects_low_criticality() {
        assert!(matches!(find_fibonacci_parameter(1.0f64, 7, 1e-12), Err(Error::Domain(_))));
        assert!(matches!(find_fibonacci_parameter(0.5f64, 7, 1e-12), Err(Error::Domain(_))));
        assert!(RealUnimodalMap::new(1.0f64, 1.5).is_err());
        assert!(RealUnimodalMap::new(2.0f64, 2.5).is_err());
    }

    #[test]
    fn kneading_prefix() {
        let k = fibonacci_kneading(8);
        assert_eq!(k, vec![true, false, false, true, true, true, false, true]);
        // The sequence is realised by the Fibonacci parameter itself.
        let a = find_fibonacci_parameter(2.0f64, 8, 0.0).unwrap();
        let orbit = itinerary(&RealUnimodalMap::new(2.0, a).unwrap(), 40);
        let signs: Vec<bool> = orbit.into_iter().map(Option::unwrap).collect();
        assert_eq!(signs, fibonacci_kneading(40));
    }

    #[test]
    fn quadratic_parameter_and_returns() {
        let a = find_fibonacci_parameter(2.0f64, 7, 1e-14).unwrap();
        // Reference from a 120-digit bisection on the same kneading.
        assert!((a - 1.870_528_632_164_645).abs() < 1e-12, "{a}");
        let map = RealUnimodalMap::new(2.0, a).unwrap();
        assert_eq!(closest_returns(&map, 30), FIB.to_vec());
    }

    #[test]
    fn parameter_is_stable_in_tolerance() {
        let a = find_fibonacci_parameter(2.0f64, 7, 1e-10).unwrap();
        let b = find_fibonacci_parameter(2.0f64, 7, 1e-11).unwrap();
        let len = 200;
        let ia = itinerary(&RealUnimodalMap::new(2.0, a).unwrap(), 40);
        let ib = itinerary(&RealUnimodalMap::new(2.0, b).unwrap(), 40);
        assert_eq!(ia, ib);
        assert!((a - b).abs() <= 1e-10);
        let _ = len;
    }

    #[test]
    fn kneading_order_is_monotone_across_the_bracket() {
        let target = fibonacci_kneading(89);
        let top = full_parameter(2.0f64);
        let mut seen_greater = false;
        let mut seen_less = false;
        for i in 0..=2000 {
            let a = 1.0 + (top - 1.0) * i as f64 / 2000.0;
            let o = kneading_cmp(&itinerary(&RealUnimodalMap::new(2.0, a).unwrap(), 89), &target);
            match o {
                Ordering::Less => {
                    assert!(!seen_greater, "order went back down at a = {a}");
                    seen_less = true;
                }
                Ordering::Greater => seen_greater = true,
                Ordering::Equal => assert!(!seen_greater),
            }
        }
        assert!(seen_less && seen_greater);
    }

    #[test]
    fn quadratic_nest() {
        let nest: PrincipalNest<TwoFloat> = fibonacci_nest(TwoFloat::from(2.0), 10).unwrap();
        assert_eq!(nest.return_times[..6], [3, 5, 8, 13, 21, 34]);
        for w in nest.return_times.windows(3) {
            assert_eq!(w[2], w[1] + w[0]);
        }
        for w in nest.half_widths.windows(2) {
            assert!(w[1] < w[0]);
        }
        // Reference half-widths from the 120-digit prototype.
        let h: Vec<f64> = nest.half_widths.iter().map(|h| h.as_f64()).collect();
        assert!((h[0] - 0.956_203_5).abs() < 1e-7);
        assert!((h[1] - 0.435_017_01).abs() < 1e-8);
        assert!((h[5] - 6.964_500_6e-4).abs() < 1e-11);
        let g = geometry_diagnostics(&nest);
        assert!(g.ratios[2..9].windows(2).all(|w| w[1] < w[0]), "{:?}", g.ratios);
        assert_eq!(g.verdict, GeometryVerdict::Decaying);
        for (n, (lo, hi)) in nest.lateral.iter().enumerate() {
            assert!(lo.as_f64() >= nest.half_widths[n + 1].as_f64() * (1.0 - 1e-14) && hi.as_f64() <= nest.half_widths[n].as_f64() * (1.0 + 1e-14));
            assert_eq!(nest.lateral_return_times[n], nest.return_times[n + 1] - nest.return_times[n]);
        }
    }

    #[test]
    fn high_criticality_nest_has_bounded_geometry() {
        let nest: PrincipalNest<TwoFloat> = fibonacci_nest(TwoFloat::from(8.0), 10).unwrap();
        for w in nest.return_times.windows(3) {
            assert_eq!(w[2], w[1] + w[0]);
        }
        let g = geometry_diagnostics(&nest);
        assert_eq!(g.verdict, GeometryVerdict::Bounded, "{:?}", g.ratios);
        assert!(g.ratios[3..].iter().all(|r| *r >= BOUNDED_RATIO));
    }

    #[test]
    fn intervals_are_symmetric() {
        let nest: PrincipalNest<f64> = fibonacci_nest(2.0, 6).unwrap();
        for (lo, hi) in nest.intervals() {
            assert!((lo + hi).abs() <= 1e-12);
        }
    }

    #[test]
    fn geometric_synthetic_nest_is_bounded() {
        let ratios = vec![0.4; 10];
        let g = geometry_from_ratios(&ratios, &[]);
        assert_eq!(g.verdict, GeometryVerdict::Bounded);
        assert!((g.min_ratio - 0.4).abs() < 1e-15);
        assert_eq!(geometry_from_ratios(&[0.4; 3], &[]).verdict, GeometryVerdict::Undecided);
        let falling: Vec<f64> = (0..10).map(|k| 0.2 * 0.7f64.powi(k)).collect();
        assert_eq!(geometry_from_ratios(&falling, &[]).verdict, GeometryVerdict::Decaying);
    }

    #[test]
    fn non_fibonacci_map_breaks_the_nest() {
        // Period-3 window: returns to I^0 stop following the recursion.
        let map = RealUnimodalMap::new(2.0f64, 1.7549).unwrap();
        assert!(matches!(build_principal_nest(&map, 8), Err(Error::Combinatorics { .. })));
    }

    #[test]
    fn real_stats_are_deterministic_and_monotone() {
        let nest: PrincipalNest<TwoFloat> = fibonacci_nest(TwoFloat::from(2.0), 8).unwrap();
        let sys = RealNest::from(&nest);
        let cfg = Sampling { samples: 4000, seed: 3, horizon: 200 };
        let a = real_escape_stats(&sys, 1, 3, cfg).unwrap();
        let b = real_escape_stats(&sys, 1, 3, cfg).unwrap();
        assert_eq!(a, b);
        let prof = stats::estimate_eta_profile(&sys, 1, 5, cfg).unwrap();
        assert!(prof.eta.windows(2).all(|w| w[1].value <= w[0].value));
        let ind = typical_orbit_indicator(&sys, 4, 200, 2000, 1).unwrap();
        assert!(ind.value >= 0.0 && ind.value <= 1.0);
    }
}
