//! Deterministic random streams and binomial estimates.
//!
//! Every Monte Carlo draw comes from a ChaCha stream addressed by
//! `(seed, op, index)`: the key mixes the seed with an operation tag, the
//! stream number is the sample index. A sample therefore sees the same
//! numbers whichever worker evaluates it, and reductions over integer counts
//! and minima make the estimates independent of the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Operation tags keep the streams of different estimators disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Op {
    Eta = 1,
    Xi = 2,
    Rho = 3,
    Kappa = 4,
    TauUpsilon = 5,
    Nesting = 6,
    Area = 7,
    Measure = 8,
    Custom = 64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// The stream for sample `index` of operation `op` under `seed`.
pub fn stream(seed: u64, op: Op, index: u64) -> ChaCha8Rng {
    let key = splitmix(seed ^ splitmix(op as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Uniform point of the closed unit disk.
pub fn unit_disk(rng: &mut impl Rng) -> [f64; 2] {
    let r = rng.random::<f64>().sqrt();
    let t = std::f64::consts::TAU * rng.random::<f64>();
    [r * t.cos(), r * t.sin()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
}

impl Estimate {
    /// Proportion `k/n` with its 95% Wilson interval.
    pub fn proportion(k: u64, n: u64) -> Self {
        let (ci_low, ci_high) = wilson(k, n);
        let value = if n == 0 { f64::NAN } else { k as f64 / n as f64 };
        Self { value, ci_low: ci_low.min(value), ci_high: ci_high.max(value), n_samples: n }
    }

    pub fn exact(value: f64, n: u64) -> Self {
        Self { value, ci_low: value, ci_high: value, n_samples: n }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Maps `f(index, rng)` over `0..n` in parallel and folds the outcomes with
/// an associative `combine`, so the result does not depend on scheduling.
pub fn par_fold<A, F, C>(seed: u64, op: Op, n: u64, identity: A, f: F, combine: C) -> A
where
    A: Clone + Send + Sync,
    F: Fn(u64, &mut ChaCha8Rng) -> A + Sync,
    C: Fn(A, A) -> A + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, op, i);
            f(i, &mut rng)
        })
        .reduce(|| identity.clone(), &combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Op::Eta, 3).random();
        let b: u64 = stream(7, Op::Eta, 3).random();
        let c: u64 = stream(7, Op::Eta, 4).random();
        let d: u64 = stream(7, Op::Xi, 3).random();
        let e: u64 = stream(8, Op::Eta, 3).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }

    #[test]
    fn wilson_known_values() {
        // k = 0: upper bound z²/(n + z²)
        let (lo, hi) = wilson(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (100.0 + Z95 * Z95)).abs() < 1e-15);
        let (lo, hi) = wilson(50, 100);
        assert!((lo - 0.403_831_530_366).abs() < 1e-11 && (hi - 0.596_168_469_634).abs() < 1e-11);
        let e = Estimate::proportion(3, 10);
        assert!(e.ci_low <= e.value && e.value <= e.ci_high);
    }

    #[test]
    fn wilson_coverage() {
        let p = 0.2;
        let n = 400;
        let covered = (0..1000u64)
            .filter(|&t| {
                let mut rng = stream(11, Op::Custom, t);
                let k = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
                let (lo, hi) = wilson(k, n);
                lo <= p && p <= hi
            })
            .count();
        assert!(covered >= 900, "{covered}");
    }

    #[test]
    fn par_fold_is_thread_count_independent() {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                par_fold(5, Op::Custom, 5000, (0u64, f64::INFINITY), |_, r| {
                    let x: f64 = r.random();
                    ((x < 0.3) as u64, x)
                }, |a, b| (a.0 + b.0, a.1.min(b.1)))
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn unit_disk_draws_stay_inside() {
        let mut rng = stream(1, Op::Area, 0);
        for _ in 0..1000 {
            let [x, y] = unit_disk(&mut rng);
            assert!(x * x + y * y <= 1.0);
        }
    }
}
