//! Iteration engine for the unicritical family `z^d + c`.
//!
//! Orbits, derivative cocycles (kept as log-moduli), escape detection,
//! inverse branches, and the superstable / period-doubling parameter
//! finders on the real slice of the family.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ln_abs, Real};

/// Budget for every bisection in this module.
pub const BISECTION_BUDGET: usize = 200;

/// Anything that can be iterated like a holomorphic map of the plane.
///
/// The domain nests and the statistics estimators are written against this
/// trait so that synthetic maps (linear maps, monomials) can be plugged in
/// for oracle tests.
pub trait Dynamics<T: Real>: Send + Sync {
    fn apply(&self, z: Complex<T>) -> Complex<T>;
    /// `log |Df(z)|`.
    fn log_abs_derivative(&self, z: Complex<T>) -> T;
    /// `|z| > R` implies monotone escape.
    fn escape_radius(&self) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Complex,
    /// Parameter on the real axis; the real line is invariant.
    Real,
}

/// One member `f(z) = z^d + c` of the unicritical family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMap<T> {
    c: Complex<T>,
    degree: u32,
    escape_radius: T,
    kind: MapKind,
}

impl<T: Real> FamilyMap<T> {
    pub fn new(c: Complex<T>, degree: u32) -> Result<Self> {
        if degree < 2 || degree % 2 != 0 {
            return Err(Error::Domain(format!("degree must be even and >= 2, got {degree}")));
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::Domain("parameter must be finite".into()));
        }
        let one = T::one();
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let r = (one + (one + four * c.norm()).sqrt()) / two;
        let kind = if c.im == T::zero() { MapKind::Real } else { MapKind::Complex };
        Ok(Self { c, degree, escape_radius: r.max(two), kind })
    }

    pub fn real(c: T, degree: u32) -> Result<Self> {
        Self::new(Complex::new(c, T::zero()), degree)
    }

    pub fn quadratic(c: Complex<T>) -> Self {
        Self::new(c, 2).expect("degree 2 is admissible")
    }

    pub fn c(&self) -> Complex<T> {
        self.c
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn escape_radius(&self) -> T {
        self.escape_radius
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn critical_value(&self) -> Complex<T> {
        self.c
    }

    #[inline]
    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        if self.degree == 2 {
            z * z + self.c
        } else {
            z.powu(self.degree) + self.c
        }
    }

    #[inline]
    pub fn derivative(&self, z: Complex<T>) -> Complex<T> {
        z.powu(self.degree - 1) * T::lit(self.degree as f64)
    }

    /// `log |Df(z)| = log d + (d-1) log |z|`.
    #[inline]
    pub fn log_deriv(&self, z: Complex<T>) -> T {
        let d = T::lit(self.degree as f64);
        d.ln() + (d - T::one()) * ln_abs(z)
    }

    /// Real-slice evaluation `x^d + c.re`.
    #[inline]
    pub fn eval_real(&self, x: T) -> T {
        if self.degree == 2 {
            x * x + self.c.re
        } else {
            x.powi(self.degree as i32) + self.c.re
        }
    }

    #[inline]
    pub fn escaped(&self, z: Complex<T>) -> bool {
        z.norm_sqr() > self.escape_radius * self.escape_radius
    }

    /// First `k <= max_iter` with `|f^k(z)| > R`, stopping there.
    pub fn escape_time(&self, z0: Complex<T>, max_iter: usize) -> Option<usize> {
        let mut z = z0;
        for k in 0..=max_iter {
            if self.escaped(z) {
                return Some(k);
            }
            z = self.eval(z);
        }
        None
    }
}

impl<T: Real> Dynamics<T> for FamilyMap<T> {
    #[inline]
    fn apply(&self, z: Complex<T>) -> Complex<T> {
        self.eval(z)
    }

    #[inline]
    fn log_abs_derivative(&self, z: Complex<T>) -> T {
        self.log_deriv(z)
    }

    fn escape_radius(&self) -> T {
        self.escape_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitResult<T> {
    pub final_point: Complex<T>,
    /// `sum_{j < steps} log |Df(f^j z0)|`; zero when not tracked.
    pub log_deriv_modulus: T,
    /// First `k` with `|f^k(z0)| > R`.
    pub escape_time: Option<usize>,
    pub steps_taken: usize,
}

/// Advances `z0` by `n` steps of `map`.
///
/// The orbit is followed for all `n` steps; the first escape time is recorded
/// but does not stop the iteration, so `final_point` is always `f^n(z0)`.
/// A non-finite iterate is reported as [`Error::Overflow`].
pub fn iterate_orbit<T: Real>(
    map: &FamilyMap<T>,
    z0: Complex<T>,
    n: usize,
    track_derivative: bool,
) -> Result<OrbitResult<T>> {
    if !(z0.re.is_finite() && z0.im.is_finite()) {
        return Err(Error::Domain("z0 must be finite".into()));
    }
    let mut z = z0;
    let mut log_d = T::zero();
    let mut escape_time = None;
    for step in 0..n {
        if escape_time.is_none() && map.escaped(z) {
            escape_time = Some(step);
        }
        if track_derivative {
            log_d = log_d + map.log_deriv(z);
        }
        z = map.eval(z);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Overflow { step: step + 1 });
        }
    }
    if escape_time.is_none() && map.escaped(z) {
        escape_time = Some(n);
    }
    Ok(OrbitResult { final_point: z, log_deriv_modulus: log_d, escape_time, steps_taken: n })
}

/// All solutions of `f(z) = w`; a single point when `w` is the critical value.
pub fn preimages<T: Real>(map: &FamilyMap<T>, w: Complex<T>) -> Vec<Complex<T>> {
    let u = w - map.c;
    if u.re == T::zero() && u.im == T::zero() {
        return vec![Complex::new(T::zero(), T::zero())];
    }
    let d = map.degree;
    if d == 2 {
        let s = u.sqrt();
        return vec![s, -s];
    }
    let dd = T::lit(d as f64);
    let modulus = u.norm().powf(T::one() / dd);
    let arg = u.im.atan2(u.re);
    let turn = T::TAU() / dd;
    (0..d)
        .map(|k| Complex::from_polar(modulus, arg / dd + turn * T::lit(k as f64)))
        .collect()
}

/// `f_c^n(0)` on the real axis, short-circuiting to `+inf` after escape.
pub fn critical_iterate<T: Real>(degree: u32, c: T, n: u64) -> T {
    let two = T::lit(2.0);
    let bound = ((T::one() + (T::one() + T::lit(4.0) * c.abs()).sqrt()) / two).max(two);
    let mut x = T::zero();
    for _ in 0..n {
        x = x.powi(degree as i32) + c;
        if x.abs() > bound {
            return T::infinity();
        }
    }
    x
}

/// Bisection root of `c -> f_c^period(0)` inside `[lo, hi]`.
pub fn find_superstable<T: Real>(degree: u32, period: u64, lo: T, hi: T) -> Result<T> {
    if degree < 2 || degree % 2 != 0 {
        return Err(Error::Domain(format!("degree must be even and >= 2, got {degree}")));
    }
    if period == 0 {
        return Err(Error::Domain("period must be positive".into()));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let g = |c: T| critical_iterate(degree, c, period);
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == T::zero() {
        return Ok(lo);
    }
    if g_hi == T::zero() {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Bracket { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    for _ in 0..BISECTION_BUDGET {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == T::zero() {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / T::lit(2.0))
}

/// Result of [`find_doubling_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingLimit<T> {
    /// Extrapolated accumulation parameter.
    pub parameter: T,
    /// Superstable parameters of periods `1, 2, 4, …, 2^k`.
    pub superstable: Vec<T>,
    /// Gap ratios `(c_{k-1} - c_k) / (c_k - c_{k+1})`.
    pub gap_ratios: Vec<T>,
}

impl<T: Real> DoublingLimit<T> {
    /// Number of period-doubling levels used.
    pub fn levels(&self) -> usize {
        self.superstable.len() - 1
    }
}

/// Most doublings attempted before giving up (period `2^MAX_DOUBLINGS`).
pub const MAX_DOUBLINGS: usize = 26;

/// Superstable parameters of periods `2^0 … 2^levels`.
///
/// Each root is searched for just below the previous one, on a scale set by
/// the previous gap.
pub fn superstable_cascade<T: Real>(degree: u32, levels: usize) -> Result<Vec<T>> {
    let mut cs = vec![T::zero()];
    if levels == 0 {
        return Ok(cs);
    }
    // f_c^2(0) = c^d + c vanishes at c = -1 for every even d.
    cs.push(find_superstable(degree, 2, T::lit(-1.5), T::lit(-0.5))?);
    for k in 2..=levels {
        let c = next_superstable(degree, cs[k - 2], cs[k - 1], 1u64 << k)?;
        cs.push(c);
    }
    Ok(cs)
}

/// Next root of the cascade below `prev`, given the two previous roots.
///
/// `f^{2p}(0)` also vanishes at `prev` itself, so the search starts a small
/// fraction of the last gap away and walks outward on a geometric grid; the
/// first sign change is the cascade root, and later ones belong to other
/// windows.
fn next_superstable<T: Real>(degree: u32, before: T, prev: T, period: u64) -> Result<T> {
    const STEPS: i32 = 96;
    let gap = before - prev;
    let g = |c: T| critical_iterate(degree, c, period);
    let start = T::lit(1.0 / 256.0);
    let growth = T::lit(256.0f64.powf(1.0 / STEPS as f64));
    let mut t = start;
    let mut a = prev - gap * t;
    let mut g_a = g(a);
    for _ in 0..STEPS {
        let t_next = t * growth;
        let b = prev - gap * t_next;
        let g_b = g(b);
        if g_a.signum() != g_b.signum() || g_b == T::zero() {
            let c = find_superstable(degree, period, b, a)?;
            if !(c < prev) {
                break;
            }
            return Ok(c);
        }
        t = t_next;
        a = b;
        g_a = g_b;
    }
    Err(Error::Convergence(format!("no superstable parameter of period {period} below {prev}")))
}

fn extrapolate<T: Real>(cs: &[T]) -> (T, Vec<T>) {
    let ratios: Vec<T> = cs
        .windows(3)
        .map(|w| (w[0] - w[1]) / (w[1] - w[2]))
        .collect();
    let k = cs.len() - 1;
    let last_gap = cs[k - 1] - cs[k];
    let limit = match ratios.last() {
        Some(&delta) if delta > T::one() => cs[k] - last_gap / (delta - T::one()),
        _ => cs[k],
    };
    (limit, ratios)
}

/// Accumulation parameter of the period-doubling cascade of `z^d + c`.
///
/// Superstable parameters of period `2^k` are located one level at a time;
/// the sequence stops once successive values differ by less than `tol`, and
/// the last gap is extrapolated geometrically.
pub fn find_doubling_limit<T: Real>(degree: u32, tol: T) -> Result<DoublingLimit<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Domain("tol must be positive".into()));
    }
    let mut cs = superstable_cascade::<T>(degree, 2)?;
    loop {
        let k = cs.len() - 1;
        if (cs[k - 1] - cs[k]).abs() < tol && k >= 3 {
            let (parameter, gap_ratios) = extrapolate(&cs);
            return Ok(DoublingLimit { parameter, superstable: cs, gap_ratios });
        }
        if k >= MAX_DOUBLINGS {
            return Err(Error::Convergence(format!(
                "superstable gaps still >= tol after {MAX_DOUBLINGS} doublings"
            )));
        }
        let c = next_superstable(degree, cs[k - 1], cs[k], 1u64 << (k + 1))?;
        cs.push(c);
    }
}

/// Doubling limit extrapolated from exactly `levels` doublings.
pub fn doubling_limit_at_depth<T: Real>(degree: u32, levels: usize) -> Result<DoublingLimit<T>> {
    if levels < 3 {
        return Err(Error::Domain("need at least three doublings".into()));
    }
    let cs = superstable_cascade::<T>(degree, levels)?;
    let (parameter, gap_ratios) = extrapolate(&cs);
    Ok(DoublingLimit { parameter, superstable: cs, gap_ratios })
}
