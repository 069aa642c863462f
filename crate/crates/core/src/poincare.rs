//! Truncated Poincaré series `Ξ^{[J]}_δ(z) = Σ_{n ≤ J} Σ_{f^n ζ = z} |Df^n(ζ)|^{-δ}`.
//!
//! The backward orbit of `z` is walked depth first with an explicit stack.
//! A branch whose weight falls below `prune_eps` is dropped together with its
//! subtree, and the dropped weight is accumulated so the loss stays visible.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{preimages, FamilyMap};
use crate::error::{Error, Result};
use crate::nest::DomainNest;
use crate::regression::fit_line;
use crate::sampling::{self, Estimate, Op, Z95};
use crate::scalar::Real;
use crate::stats::{LevelSystem, Region};

/// Default weight threshold below which a branch is pruned.
pub const DEFAULT_PRUNE_EPS: f64 = 1e-14;
/// Default slope threshold of the divergence diagnostic.
pub const DEFAULT_SLOPE_EPS: f64 = 0.02;
/// Shallowest account the diagnostic accepts.
pub const MIN_DIAGNOSTIC_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesAccount {
    pub delta: f64,
    /// `S_0 ≤ S_1 ≤ … ≤ S_J`, with `S_0 = 1`.
    pub partial_sums: Vec<f64>,
    /// Contribution of preimages of depth exactly `j`.
    pub level_sums: Vec<f64>,
    /// Total weight of the pruned branch roots.
    pub pruned_mass_bound: f64,
    /// Pruned weight per depth.
    pub pruned_by_level: Vec<f64>,
    pub depth: usize,
    pub base_point: [f64; 2],
}

impl SeriesAccount {
    pub fn total(&self) -> f64 {
        *self.partial_sums.last().unwrap()
    }
}

/// One backward step: preimages of a point with `log |Df|` at each.
trait Backward<T: Real>: Sync {
    fn children(&self, w: Complex<T>) -> Result<Vec<(Complex<T>, f64)>>;
}

struct FamilyBackward<'a, T: Real>(&'a FamilyMap<T>);

impl<T: Real> Backward<T> for FamilyBackward<'_, T> {
    fn children(&self, w: Complex<T>) -> Result<Vec<(Complex<T>, f64)>> {
        preimages(self.0, w)
            .into_iter()
            .map(|p| {
                if p.re == T::zero() && p.im == T::zero() {
                    Err(Error::SingularPoint)
                } else {
                    Ok((p, self.0.log_deriv(p).as_f64()))
                }
            })
            .collect()
    }
}

/// Preimages under `f^{P_m}` that lie in `V^m`, i.e. the inverse branches of
/// the level-`m` return map.
struct ReturnBackward<'a, T: Real> {
    map: &'a FamilyMap<T>,
    period: u64,
    radius: T,
}

impl<T: Real> Backward<T> for ReturnBackward<'_, T> {
    fn children(&self, w: Complex<T>) -> Result<Vec<(Complex<T>, f64)>> {
        let mut layer = vec![(w, 0.0)];
        for _ in 0..self.period {
            let mut next = Vec::with_capacity(layer.len() * self.map.degree() as usize);
            for (p, l) in layer {
                for q in preimages(self.map, p) {
                    if q.re == T::zero() && q.im == T::zero() {
                        return Err(Error::SingularPoint);
                    }
                    next.push((q, l + self.map.log_deriv(q).as_f64()));
                }
            }
            layer = next;
        }
        layer.retain(|(q, _)| q.norm() < self.radius);
        Ok(layer)
    }
}

struct Tally {
    level: Vec<f64>,
    pruned: Vec<f64>,
}

impl Tally {
    fn new(depth: usize) -> Self {
        Self { level: vec![0.0; depth + 1], pruned: vec![0.0; depth + 1] }
    }

    fn absorb(&mut self, other: &Tally) {
        for (a, b) in self.level.iter_mut().zip(&other.level) {
            *a += b;
        }
        for (a, b) in self.pruned.iter_mut().zip(&other.pruned) {
            *a += b;
        }
    }
}

/// Depth-first walk of the subtree below `(root, root_depth, root_log)`.
fn walk<T: Real, B: Backward<T>>(
    backward: &B,
    root: Complex<T>,
    root_depth: usize,
    root_log: f64,
    delta: f64,
    depth: usize,
    prune_eps: f64,
    tally: &mut Tally,
) -> Result<()> {
    let mut stack = vec![(root, root_depth, root_log)];
    while let Some((w, k, log_d)) = stack.pop() {
        let weight = (-delta * log_d).exp();
        if k > 0 && weight < prune_eps {
            tally.pruned[k] += weight;
            continue;
        }
        tally.level[k] += weight;
        if k < depth {
            for (q, l) in backward.children(w)?.into_iter().rev() {
                stack.push((q, k + 1, log_d + l));
            }
        }
    }
    Ok(())
}

fn series<T: Real, B: Backward<T>>(
    backward: &B,
    z: Complex<T>,
    delta: f64,
    depth: usize,
    prune_eps: f64,
) -> Result<SeriesAccount> {
    if !(delta >= 0.0) || !(prune_eps >= 0.0) {
        return Err(Error::Domain("delta and prune_eps must be non-negative".into()));
    }
    let mut tally = Tally::new(depth);
    tally.level[0] = 1.0;
    if depth > 0 {
        // First-level subtrees are independent; combine their tallies in
        // preimage order.
        let firsts = backward.children(z)?;
        let parts: Vec<Result<Tally>> = firsts
            .par_iter()
            .map(|&(q, l)| {
                let mut t = Tally::new(depth);
                walk(backward, q, 1, l, delta, depth, prune_eps, &mut t)?;
                Ok(t)
            })
            .collect();
        for part in parts {
            tally.absorb(&part?);
        }
    }
    let mut partial_sums = Vec::with_capacity(depth + 1);
    let mut acc = 0.0;
    for &s in &tally.level {
        acc += s;
        partial_sums.push(acc);
    }
    Ok(SeriesAccount {
        delta,
        partial_sums,
        pruned_mass_bound: tally.pruned.iter().sum(),
        level_sums: tally.level,
        pruned_by_level: tally.pruned,
        depth,
        base_point: [z.re.as_f64(), z.im.as_f64()],
    })
}

/// Partial sums `S_0..S_J` of the Poincaré series of `map` at `z`.
pub fn poincare_partial_sums<T: Real>(
    map: &FamilyMap<T>,
    z: Complex<T>,
    delta: f64,
    depth: usize,
    prune_eps: f64,
) -> Result<SeriesAccount> {
    series(&FamilyBackward(map), z, delta, depth, prune_eps)
}

/// `Σ_{n ≤ J} (2^{1-δ})^n r^{-δ(1 - 2^{-n})}`, the series of `z ↦ z²` at `|z| = r`.
pub fn closed_form_c0(r: f64, delta: f64, depth: usize) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::Domain(format!("r must exceed 1, got {r}")));
    }
    Ok((0..=depth)
        .map(|n| {
            let n = n as i32;
            2f64.powf(1.0 - delta).powi(n) * r.powf(-delta * (1.0 - 0.5f64.powi(n)))
        })
        .sum())
}

/// A real base point outside the filled Julia set and inside twice the
/// escape radius.
pub fn default_base_point<T: Real>(map: &FamilyMap<T>) -> Complex<T> {
    Complex::new(map.escape_radius() * T::lit(1.5), T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converging,
    Diverging,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub verdict: SeriesVerdict,
    /// `exp(slope)`: fitted ratio of consecutive level sums.
    pub growth: f64,
    pub slope: f64,
}

/// Fits `log(S_{j+1} - S_j)` against `j` over the last half of the levels.
pub fn divergence_diagnostic(account: &SeriesAccount, slope_eps: f64) -> Result<Divergence> {
    if account.depth < MIN_DIAGNOSTIC_DEPTH {
        return Err(Error::Precondition(format!(
            "divergence diagnostic needs depth >= {MIN_DIAGNOSTIC_DEPTH}, got {}",
            account.depth
        )));
    }
    let first = account.depth / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (first.max(1)..=account.depth)
        .filter(|&j| account.level_sums[j] > 0.0)
        .map(|j| (j as f64, account.level_sums[j].ln()))
        .unzip();
    if xs.len() < 2 {
        // Everything past the midpoint was pruned.
        return Ok(Divergence { verdict: SeriesVerdict::Converging, growth: 0.0, slope: f64::NEG_INFINITY });
    }
    let slope = fit_line(&xs, &ys)?.slope;
    let verdict = if slope > slope_eps {
        SeriesVerdict::Diverging
    } else if slope < -slope_eps {
        SeriesVerdict::Converging
    } else {
        SeriesVerdict::Undecided
    };
    Ok(Divergence { verdict, growth: slope.exp(), slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBracket {
    pub low: f64,
    pub high: f64,
    /// No grid point diverged; `low` is only the grid minimum.
    pub low_is_grid_edge: bool,
    /// No grid point converged; `high` is only the grid maximum.
    pub high_is_grid_edge: bool,
    pub verdicts: Vec<(f64, SeriesVerdict)>,
}

/// Brackets the critical exponent between the largest diverging and the
/// smallest converging grid value.
pub fn bound_delta_cr<T: Real>(
    map: &FamilyMap<T>,
    z: Complex<T>,
    depth: usize,
    delta_grid: &[f64],
    prune_eps: f64,
) -> Result<DeltaBracket> {
    if delta_grid.is_empty() || delta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("delta grid must be non-empty and strictly increasing".into()));
    }
    let verdicts = delta_grid
        .iter()
        .map(|&d| {
            let acc = poincare_partial_sums(map, z, d, depth, prune_eps)?;
            Ok((d, divergence_diagnostic(&acc, DEFAULT_SLOPE_EPS)?.verdict))
        })
        .collect::<Result<Vec<_>>>()?;
    if verdicts.iter().all(|v| v.1 == SeriesVerdict::Undecided) {
        return Err(Error::Inconclusive);
    }
    let grid_min = delta_grid[0];
    let grid_max = *delta_grid.last().unwrap();
    let converging = verdicts.iter().find(|v| v.1 == SeriesVerdict::Converging).map(|v| v.0);
    let high = converging.unwrap_or(grid_max);
    let diverging =
        verdicts.iter().filter(|v| v.1 == SeriesVerdict::Diverging && v.0 <= high).map(|v| v.0).next_back();
    let low = diverging.unwrap_or(grid_min);
    Ok(DeltaBracket {
        low: low.min(high),
        high,
        low_is_grid_edge: diverging.is_none(),
        high_is_grid_edge: converging.is_none(),
        verdicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub omega: Estimate,
    /// `max / min` of the sampled series values.
    pub spread: f64,
    /// Draws replaced because the series was singular there.
    pub resampled: u64,
}

const OMEGA_ATTEMPTS: u32 = 10_000;

/// Mean of `Ξ^{[J]}_δ(f_m, x)` over `K` uniform points `x ∈ A^n`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_omega<T: Real>(
    nest: &DomainNest<T>,
    m: usize,
    n: usize,
    delta: f64,
    annulus_samples: u64,
    depth: usize,
    prune_eps: f64,
    seed: u64,
) -> Result<OmegaEstimate> {
    if annulus_samples == 0 {
        return Err(Error::EmptySample);
    }
    if m >= n || n > nest.depth() {
        return Err(Error::Precondition(format!("need m < n <= {}, got m = {m}, n = {n}", nest.depth())));
    }
    let backward = ReturnBackward { map: nest.map(), period: nest.level(m).period, radius: nest.radius(m) };
    let samples: Vec<Result<(f64, u64)>> = (0..annulus_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream(seed, Op::Measure, i);
            let mut resampled = 0;
            for _ in 0..OMEGA_ATTEMPTS {
                let x = nest.from_unit(n, sampling::unit_disk(&mut rng));
                if nest.membership(n, x) != Region::InAnnulus {
                    continue;
                }
                match series(&backward, x, delta, depth, prune_eps) {
                    Ok(acc) => return Ok((acc.total(), resampled)),
                    Err(Error::SingularPoint) => resampled += 1,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::DegenerateArea { level: n })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let k = samples.len() as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / k;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let half = Z95 * (var / k).sqrt();
    let max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    Ok(OmegaEstimate {
        omega: Estimate { value: mean, ci_low: mean - half, ci_high: mean + half, n_samples: annulus_samples },
        spread: max / min,
        resampled: samples.iter().map(|s| s.1).sum(),
    })
}
