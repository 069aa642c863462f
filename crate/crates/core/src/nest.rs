//! Nested disks `V^n ⊃ U^n` around the critical point.
//!
//! `V^n` is the disk of radius `r_n` about 0 and `U^n` is cut out of it by the
//! one-step test `|f_n(z)| < r_n`, where `f_n = f^{P_n}`. Radii are set by
//! the closest returns of the critical orbit: `r_0` is the escape radius and
//! `r_n = κ·|f^{P_{n-1}}(0)|` for `n ≥ 1`, so the critical value of `f_n`
//! lands well inside `V^n` and `0 ∈ U^n` at every level.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, FamilyMap};
use crate::error::{Error, Result};
use crate::sampling::{self, Estimate, Op};
use crate::scalar::Real;
use crate::stats::{LevelSystem, Region};

/// Smallest admissible closest-return modulus.
pub const MIN_SCALE: f64 = 1e-13;
/// Relative shrink of `V^n` when testing re-entry of boundary orbits.
pub const REENTRY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormSchedule {
    periods: Vec<u64>,
}

impl RenormSchedule {
    pub fn new(periods: Vec<u64>) -> Result<Self> {
        if periods.iter().any(|&p| p < 2) {
            return Err(Error::Domain("relative periods must be at least 2".into()));
        }
        Ok(Self { periods })
    }

    /// Period doubling to `depth` levels.
    pub fn doubling(depth: usize) -> Self {
        Self { periods: vec![2; depth] }
    }

    pub fn periods(&self) -> &[u64] {
        &self.periods
    }

    pub fn depth(&self) -> usize {
        self.periods.len()
    }

    /// `P_n = p_1 ⋯ p_n`, with `P_0 = 1`.
    pub fn cumulative(&self, n: usize) -> u64 {
        self.periods[..n].iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UShape {
    /// `z ∈ U^n` iff `|z| < r_n` and `|f_n(z)| < r_n`.
    OneStep,
    /// `U^n` is the concentric disk of radius `factor·r_n`.
    Disk { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDomain<T> {
    pub n: usize,
    /// `P_n`, the return time of `f_n`.
    pub period: u64,
    pub v_radius: T,
    /// `f^{P_n}(0)`, the critical value of `f_n`.
    pub closest_return: Complex<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub period: u64,
    pub v_radius: f64,
    pub closest_return: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestRecord {
    pub c: [f64; 2],
    pub degree: u32,
    pub kappa_shape: f64,
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Clone)]
pub struct DomainNest<T, M = FamilyMap<T>> {
    map: M,
    shape_factor: T,
    u_shape: UShape,
    levels: Vec<LevelDomain<T>>,
}

/// Builds levels `0..=depth` for `map` along `schedule`.
pub fn build_nest<T: Real>(
    map: FamilyMap<T>,
    schedule: &RenormSchedule,
    depth: usize,
    shape_factor: T,
) -> Result<DomainNest<T>> {
    if !(shape_factor > T::zero() && shape_factor <= T::one()) {
        return Err(Error::Precondition(format!("shape factor must lie in (0, 1], got {shape_factor}")));
    }
    if depth > schedule.depth() {
        return Err(Error::Precondition(format!(
            "schedule has {} levels, {depth} requested",
            schedule.depth()
        )));
    }
    let periods: Vec<u64> = (0..=depth).map(|n| schedule.cumulative(n)).collect();
    let last = periods[depth];
    let bound = map.escape_radius();
    let mut returns = Vec::with_capacity(depth + 1);
    let mut z = Complex::new(T::zero(), T::zero());
    let mut next = 0;
    for k in 1..=last {
        z = map.eval(z);
        if map.escaped(z) || !z.re.is_finite() {
            return Err(Error::NonRenormalizable { iterate: k });
        }
        if k == periods[next] {
            returns.push(z);
            next += 1;
        }
    }
    let mut levels = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let v_radius = if n == 0 {
            bound
        } else {
            let prev = returns[n - 1].norm();
            if !(prev >= T::lit(MIN_SCALE)) {
                return Err(Error::DegenerateScale { level: n - 1, modulus: prev.as_f64() });
            }
            shape_factor * prev
        };
        levels.push(LevelDomain { n, period: periods[n], v_radius, closest_return: returns[n] });
    }
    if let Some(w) = levels.windows(2).find(|w| !(w[1].v_radius < w[0].v_radius)) {
        return Err(Error::DegenerateScale { level: w[1].n, modulus: w[1].closest_return.norm().as_f64() });
    }
    Ok(DomainNest { map, shape_factor, u_shape: UShape::OneStep, levels })
}

impl<T: Real, M: Dynamics<T>> DomainNest<T, M> {
    /// Nest with explicit levels, for synthetic maps.
    pub fn from_levels(map: M, levels: Vec<LevelDomain<T>>, u_shape: UShape) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Precondition("a nest needs at least one level".into()));
        }
        if levels.windows(2).any(|w| !(w[1].v_radius < w[0].v_radius)) {
            return Err(Error::Precondition("radii must decrease strictly".into()));
        }
        if let UShape::Disk { factor } = u_shape {
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(Error::Precondition("disk factor must lie in (0, 1]".into()));
            }
        }
        Ok(Self { map, shape_factor: T::one(), u_shape, levels })
    }

    pub fn with_u_shape(mut self, u_shape: UShape) -> Self {
        self.u_shape = u_shape;
        self
    }

    pub fn map(&self) -> &M {
        &self.map
    }

    pub fn levels(&self) -> &[LevelDomain<T>] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &LevelDomain<T> {
        &self.levels[n]
    }

    /// Deepest level index.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn shape_factor(&self) -> T {
        self.shape_factor
    }

    pub fn u_shape(&self) -> UShape {
        self.u_shape
    }

    pub fn radius(&self, n: usize) -> T {
        self.levels[n].v_radius
    }

    /// `r_{n+1} / r_n` for consecutive levels.
    pub fn radius_ratios(&self) -> Vec<T> {
        self.levels.windows(2).map(|w| w[1].v_radius / w[0].v_radius).collect()
    }

    /// `f_n(z) = f^{P_n}(z)`; stops early once the orbit leaves the escape disk.
    pub fn return_map(&self, n: usize, z: Complex<T>) -> Complex<T> {
        let bound = self.map.escape_radius();
        let mut w = z;
        for _ in 0..self.levels[n].period {
            w = self.map.apply(w);
            if w.norm() > bound {
                break;
            }
        }
        w
    }

    /// `f_n(z)` together with `log |Df_n(z)|`.
    pub fn return_map_with_derivative(&self, n: usize, z: Complex<T>) -> (Complex<T>, f64) {
        let mut w = z;
        let mut log_d = 0.0;
        for _ in 0..self.levels[n].period {
            log_d += self.map.log_abs_derivative(w).as_f64();
            w = self.map.apply(w);
        }
        (w, log_d)
    }

    pub fn membership(&self, n: usize, z: Complex<T>) -> Region {
        let r = self.levels[n].v_radius;
        if !(z.norm() < r) {
            return Region::OutsideV;
        }
        let inside_u = match self.u_shape {
            UShape::OneStep => self.return_map(n, z).norm() < r,
            UShape::Disk { factor } => z.norm() < r * T::lit(factor),
        };
        if inside_u {
            Region::InsideU
        } else {
            Region::InAnnulus
        }
    }

    /// Fraction of `N` equally spaced points of `∂V^n` whose `f`-orbit
    /// re-enters `V^n` within `horizon` steps.
    pub fn check_nice_property(&self, n: usize, boundary_samples: usize, horizon: usize) -> Result<Estimate> {
        if boundary_samples < 100 {
            return Err(Error::Precondition("at least 100 boundary samples are required".into()));
        }
        let r = self.levels[n].v_radius;
        let inner = r * T::lit(1.0 - REENTRY_MARGIN);
        let bound = self.map.escape_radius();
        let count = sampling::par_fold(
            0,
            Op::Custom,
            boundary_samples as u64,
            0u64,
            |i, _| {
                let theta = T::TAU() * T::lit((i as f64 + 0.5) / boundary_samples as f64);
                let mut z = Complex::from_polar(r, theta);
                for _ in 0..horizon {
                    z = self.map.apply(z);
                    if z.norm() < inner {
                        return 1;
                    }
                    if z.norm() > bound {
                        break;
                    }
                }
                0
            },
            |a, b| a + b,
        );
        Ok(Estimate::proportion(count, boundary_samples as u64))
    }

    /// Monte Carlo fraction of `V^n` occupied by `U^n`.
    pub fn u_fraction(&self, n: usize, samples: u64, seed: u64) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::EmptySample);
        }
        let hits = sampling::par_fold(
            seed,
            Op::Area,
            samples,
            0u64,
            |_, rng| {
                let u = sampling::unit_disk(rng);
                (self.membership(n, self.from_unit(n, u)) == Region::InsideU) as u64
            },
            |a, b| a + b,
        );
        Ok(Estimate::proportion(hits, samples))
    }

    /// Share of `U^{n+1}` lying outside `U^n`, from uniform draws of
    /// `V^{n+1}` that pass the level-`(n+1)` test.
    ///
    /// The stronger inclusion `V^{n+1} ⊂ U^n` fails for round disks (a few
    /// percent at the doubling limit with `κ = 0.5`) and is not tested here.
    pub fn nesting_violation(&self, n: usize, samples: u64, seed: u64) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::EmptySample);
        }
        if n + 1 > self.depth() {
            return Err(Error::Precondition(format!("level {} is not built", n + 1)));
        }
        let (inside, misses) = sampling::par_fold(
            seed,
            Op::Nesting,
            samples,
            (0u64, 0u64),
            |_, rng| {
                let z = self.from_unit(n + 1, sampling::unit_disk(rng));
                if self.membership(n + 1, z) != Region::InsideU {
                    return (0, 0);
                }
                (1, (self.membership(n, z) != Region::InsideU) as u64)
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
        if inside == 0 {
            return Err(Error::DegenerateArea { level: n + 1 });
        }
        Ok(Estimate::proportion(misses, inside))
    }
}

impl<T: Real> DomainNest<T, FamilyMap<T>> {
    pub fn record(&self) -> NestRecord {
        let c = self.map.c();
        NestRecord {
            c: [c.re.as_f64(), c.im.as_f64()],
            degree: self.map.degree(),
            kappa_shape: self.shape_factor.as_f64(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelRecord {
                    n: l.n,
                    period: l.period,
                    v_radius: l.v_radius.as_f64(),
                    closest_return: [l.closest_return.re.as_f64(), l.closest_return.im.as_f64()],
                })
                .collect(),
        }
    }
}

impl<T: Real, M: Dynamics<T>> LevelSystem for DomainNest<T, M> {
    type Point = Complex<T>;

    fn depth(&self) -> usize {
        DomainNest::depth(self)
    }

    fn region(&self, n: usize, x: Complex<T>) -> Region {
        self.membership(n, x)
    }

    fn in_v(&self, n: usize, x: Complex<T>) -> bool {
        x.norm() < self.levels[n].v_radius
    }

    fn step(&self, m: usize, x: Complex<T>) -> (Complex<T>, f64) {
        self.return_map_with_derivative(m, x)
    }

    fn from_unit(&self, n: usize, u: [f64; 2]) -> Complex<T> {
        Complex::new(T::lit(u[0]), T::lit(u[1])) * self.levels[n].v_radius
    }

    fn draw_unit(&self, rng: &mut rand_chacha::ChaCha8Rng) -> [f64; 2] {
        sampling::unit_disk(rng)
    }

    fn v_measure(&self, n: usize) -> f64 {
        let r = self.levels[n].v_radius.as_f64();
        std::f64::consts::PI * r * r
    }
}
