//! Period-doubling fixed point `g(z) = α⁻¹ g(g(αz))` for even maps
//! `g(z) = 1 + Σ a_i z^{d i}`, normalised by `g(0) = 1` and `α = g(1)`.
//!
//! The truncated series is fitted by collocation on Chebyshev nodes in
//! `(0, 1)` (evenness covers the negative half) with a finite-difference
//! Newton iteration. Higher orders are reached by continuation from lower
//! ones, and degrees above two by continuation in the exponent.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite-difference step for the collocation Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-7;
/// Newton stops after this many consecutive non-improving steps.
pub const STALL_LIMIT: usize = 10;
const MAX_NEWTON: usize = 200;
const COLD_START: usize = 5;
const EXPONENT_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution<T> {
    pub degree: u32,
    /// Truncation degree in `z`; the series holds `order / degree` terms.
    pub order: usize,
    /// Signed spatial scaling `g(1)`.
    pub alpha: T,
    /// `a_1, a_2, …` multiplying `z^d, z^{2d}, …`.
    pub coeffs: Vec<T>,
    /// Sup of the functional-equation defect on a Chebyshev grid of `[-1, 1]`.
    pub residual: T,
}

impl<T: Real> FixedPointSolution<T> {
    pub fn eval_real(&self, x: T) -> T {
        eval_series(&self.coeffs, T::lit(self.degree as f64), x)
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        let w = z.powu(self.degree);
        let mut s = Complex::new(T::zero(), T::zero());
        for &a in self.coeffs.iter().rev() {
            s = (s + a) * w;
        }
        s + T::one()
    }

    /// Dilation `λ = 1/|α| > 1` of the stationary tower.
    pub fn dilation(&self) -> T {
        T::one() / self.alpha.abs()
    }

    /// `g(x) - α⁻¹ g(g(αx))`.
    pub fn defect(&self, x: T) -> T {
        defect(&self.coeffs, T::lit(self.degree as f64), self.alpha, x)
    }
}

/// Horner evaluation of `1 + Σ a_i |x|^{e i}`.
fn eval_series<T: Real>(coeffs: &[T], exponent: T, x: T) -> T {
    let u = x.abs_pow(exponent);
    let mut s = T::zero();
    for &a in coeffs.iter().rev() {
        s = (s + a) * u;
    }
    s + T::one()
}

fn defect<T: Real>(coeffs: &[T], exponent: T, alpha: T, x: T) -> T {
    let inner = eval_series(coeffs, exponent, alpha * x);
    eval_series(coeffs, exponent, x) - eval_series(coeffs, exponent, inner) / alpha
}

fn collocation<T: Real>(coeffs: &[T], exponent: T, nodes: &[T], out: &mut [T]) {
    let alpha = eval_series(coeffs, exponent, T::one());
    for (o, &x) in out.iter_mut().zip(nodes) {
        *o = defect(coeffs, exponent, alpha, x);
    }
}

fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| if x.is_nan() { T::nan() } else { m.max(x.abs()) })
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
pub(crate) fn solve_linear<T: Real>(a: &mut [Vec<T>], b: &mut [T]) -> Result<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, x| m.max(x.abs()));
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::Singular("jacobian is zero or non-finite"));
    }
    let eps = T::unit_roundoff() * T::lit(n as f64) * scale;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= eps {
            return Err(Error::Singular("jacobian is numerically singular"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Collocation nodes `cos((2j-1)π/(4K))`, `j = 1..K`, in `(0, 1)`.
fn nodes<T: Real>(k: usize) -> Vec<T> {
    (1..=k)
        .map(|j| (T::PI() * T::lit((2 * j - 1) as f64) / T::lit((4 * k) as f64)).cos())
        .collect()
}

/// Newton on the collocation system; returns the coefficients and the node
/// residual reached.
fn newton<T: Real>(start: &[T], exponent: T, target: T) -> Result<(Vec<T>, T)> {
    let k = start.len();
    let xs = nodes::<T>(k);
    let h = T::lit(JACOBIAN_STEP);
    let mut a = start.to_vec();
    let mut r = vec![T::zero(); k];
    collocation(&a, exponent, &xs, &mut r);
    let mut res = sup_norm(&r);
    if !res.is_finite() {
        return Err(Error::Convergence("initial guess leaves the domain".into()));
    }
    let mut stalled = 0;
    let mut trial_r = vec![T::zero(); k];
    for _ in 0..MAX_NEWTON {
        if res <= target {
            break;
        }
        let mut jac = vec![vec![T::zero(); k]; k];
        for j in 0..k {
            let mut bumped = a.clone();
            bumped[j] = bumped[j] + h;
            collocation(&bumped, exponent, &xs, &mut trial_r);
            for i in 0..k {
                jac[i][j] = (trial_r[i] - r[i]) / h;
            }
        }
        let mut rhs = r.clone();
        let step = solve_linear(&mut jac, &mut rhs)?;
        let mut t = T::one();
        let mut accepted = None;
        while t > T::lit(1e-3) {
            let cand: Vec<T> = a.iter().zip(&step).map(|(&ai, &si)| ai - t * si).collect();
            collocation(&cand, exponent, &xs, &mut trial_r);
            let cand_res = sup_norm(&trial_r);
            if cand_res.is_finite() && cand_res < res {
                accepted = Some((cand, cand_res));
                break;
            }
            t = t / T::lit(2.0);
        }
        match accepted {
            Some((cand, cand_res)) => {
                a = cand;
                res = cand_res;
                collocation(&a, exponent, &xs, &mut r);
                stalled = 0;
            }
            None => {
                // No damped step improves: either the node residual is at
                // the floor set by the difference Jacobian, or Newton is lost.
                if res < T::lit(1e-6) {
                    break;
                }
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    return Err(Error::Convergence(format!("newton stalled at node residual {res}")));
                }
                let cand: Vec<T> = a.iter().zip(&step).map(|(&ai, &si)| ai - t * si).collect();
                collocation(&cand, exponent, &xs, &mut trial_r);
                if !sup_norm(&trial_r).is_finite() {
                    return Err(Error::Convergence("newton step left the domain".into()));
                }
                a = cand;
                r.copy_from_slice(&trial_r);
                res = sup_norm(&r);
            }
        }
    }
    Ok((a, res))
}

/// Defect on `points` Chebyshev–Lobatto points of `[-1, 1]`.
pub fn grid_residual<T: Real>(coeffs: &[T], degree: u32, points: usize) -> T {
    let e = T::lit(degree as f64);
    let alpha = eval_series(coeffs, e, T::one());
    let m = points.max(2);
    (0..m)
        .map(|j| {
            let x = (T::PI() * T::lit(j as f64) / T::lit((m - 1) as f64)).cos();
            defect(coeffs, e, alpha, x).abs()
        })
        .fold(T::zero(), |acc, v| if v.is_nan() { T::nan() } else { acc.max(v) })
}

fn continue_in_order<T: Real>(exponent: T, terms: usize, seed: &[T]) -> Result<Vec<T>> {
    let node_target = T::unit_roundoff() * T::lit(8.0);
    let mut a = seed.to_vec();
    let mut k = a.len().min(terms).max(1);
    a.resize(k, T::zero());
    loop {
        let (sol, _) = newton(&a, exponent, node_target)?;
        a = sol;
        if k == terms {
            return Ok(a);
        }
        k = (k + COLD_START).min(terms);
        a.resize(k, T::zero());
    }
}

/// Fixed point of period-doubling renormalization for `z^d`.
///
/// `order` is the truncation degree in `z` (at least 2); the series carries
/// `max(1, order / d)` coefficients. The returned residual is measured on
/// `4·order + 1` points of `[-1, 1]` and must not exceed `tol`.
pub fn solve_cvitanovic<T: Real>(degree: u32, order: usize, tol: T) -> Result<FixedPointSolution<T>> {
    if degree < 2 || degree % 2 != 0 {
        return Err(Error::Domain(format!("degree must be even and >= 2, got {degree}")));
    }
    if order < 2 {
        return Err(Error::Domain("order must be at least 2".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::Domain("tol must be positive".into()));
    }
    let terms = (order / degree as usize).max(1);
    let two = T::lit(2.0);
    let mut coeffs = continue_in_order(two, terms.min(COLD_START), &[T::lit(-1.5)])?;
    if degree > 2 {
        // Deform the exponent from 2 up to d with |x|^e.
        let mut e = two;
        let target = T::lit(degree as f64);
        while e < target {
            e = (e + T::lit(EXPONENT_STEP)).min(target);
            coeffs = continue_in_order(e, coeffs.len(), &coeffs)?;
        }
    }
    coeffs = continue_in_order(T::lit(degree as f64), terms, &coeffs)?;
    let alpha = eval_series(&coeffs, T::lit(degree as f64), T::one());
    if !(alpha.abs() < T::one() && alpha != T::zero()) {
        return Err(Error::Convergence(format!("spurious solution with alpha = {alpha}")));
    }
    if coeffs[0] == T::zero() {
        return Err(Error::Convergence("leading coefficient vanished".into()));
    }
    let residual = grid_residual(&coeffs, degree, 4 * order + 1);
    if !(residual <= tol) {
        return Err(Error::Convergence(format!("residual {residual} exceeds tolerance {tol}")));
    }
    Ok(FixedPointSolution { degree, order, alpha, coeffs, residual })
}

/// Level-`m` map of the stationary tower, `α^{-m} g(α^m z)`.
pub fn tower_eval<T: Real>(sol: &FixedPointSolution<T>, level: i32, z: Complex<T>) -> Result<Complex<T>> {
    let scale = sol.alpha.powi(level);
    let w = z * scale;
    if !(w.norm() <= T::one()) {
        return Err(Error::Domain(format!("|α^m z| = {} is outside the unit disk", w.norm())));
    }
    Ok(sol.eval(w) / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Scalar Newton on the one-coefficient truncation with its single node.
    fn one_term_oracle() -> f64 {
        let x = (std::f64::consts::PI / 4.0).cos();
        let f = |a: f64| {
            let g = |t: f64| 1.0 + a * t * t;
            let al = g(1.0);
            g(x) - g(g(al * x)) / al
        };
        let mut a = -1.5;
        for _ in 0..60 {
            let h = 1e-8;
            let d = (f(a + h) - f(a - h)) / (2.0 * h);
            a -= f(a) / d;
        }
        a
    }

    #[test]
    fn one_term_truncation_matches_scalar_newton() {
        let sol = solve_cvitanovic::<f64>(2, 2, 1.0).unwrap();
        assert_eq!(sol.coeffs.len(), 1);
        let oracle = one_term_oracle();
        assert!((sol.coeffs[0] - oracle).abs() < 1e-10, "{} vs {oracle}", sol.coeffs[0]);
        assert!((sol.coeffs[0] + 1.381_137_53).abs() < 1e-6);
        assert!((sol.alpha - (1.0 + sol.coeffs[0])).abs() < 1e-15);
        assert_eq!(sol.eval_real(0.0), 1.0);
    }

    #[test]
    fn quadratic_order_twenty() {
        let sol = solve_cvitanovic::<f64>(2, 20, 1e-10).unwrap();
        assert_eq!(sol.coeffs.len(), 10);
        assert!(sol.residual <= 1e-10);
        assert!((sol.alpha + 0.399_535_280_523).abs() < 1e-10, "{}", sol.alpha);
        assert!((sol.dilation() - 2.502_907_875).abs() < 1e-8);
        assert_eq!(sol.eval_real(0.3), sol.eval_real(-0.3));
    }

    #[test]
    fn truncation_refinement_is_stable() {
        let a = solve_cvitanovic::<f64>(2, 20, 1e-10).unwrap();
        let b = solve_cvitanovic::<f64>(2, 30, 1e-10).unwrap();
        assert!((a.alpha - b.alpha).abs() <= 1e-8);
    }

    #[test]
    fn quartic_solution_exists() {
        let sol = solve_cvitanovic::<f64>(4, 40, 1e-5).unwrap();
        assert!(sol.alpha < -0.5 && sol.alpha > -0.7, "{}", sol.alpha);
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(solve_cvitanovic::<f64>(2, 1, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(solve_cvitanovic::<f64>(3, 10, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(solve_cvitanovic::<f64>(2, 10, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn unattainable_tolerance_is_reported() {
        assert!(matches!(solve_cvitanovic::<f64>(2, 4, 1e-12), Err(Error::Convergence(_))));
    }

    #[test]
    fn tower_basics() {
        let sol = solve_cvitanovic::<f64>(2, 20, 1e-10).unwrap();
        let zero = Complex::new(0.0, 0.0);
        assert_eq!(tower_eval(&sol, 0, zero).unwrap(), Complex::new(1.0, 0.0));
        for m in 0..6 {
            let v = tower_eval(&sol, m, zero).unwrap();
            assert!((v.re - sol.alpha.powi(-m)).abs() <= 1e-13 * v.re.abs());
        }
        assert!(matches!(tower_eval(&sol, 0, Complex::new(1.5, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_solver_matches_hand_solution() {
        let mut a = vec![vec![2.0f64, 1.0], vec![1.0, 3.0]];
        let mut b = vec![3.0, 5.0];
        let x = solve_linear(&mut a, &mut b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        let mut s = vec![vec![1.0f64, 2.0], vec![2.0, 4.0]];
        assert!(solve_linear(&mut s, &mut [1.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tower_semigroup(re in -0.9f64..0.9, im in -0.9f64..0.9, m in 0i32..5) {
            let sol = solve_cvitanovic::<f64>(2, 12, 1e-6).unwrap();
            let z = Complex::new(re, im) / (1.5 * sol.alpha.abs().powi(m));
            let lhs = tower_eval(&sol, m + 1, z).unwrap();
            let rhs = tower_eval(&sol, m, z * sol.alpha).unwrap() / sol.alpha;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }

        #[test]
        fn evenness(x in -1.0f64..1.0) {
            let sol = solve_cvitanovic::<f64>(2, 12, 1e-6).unwrap();
            prop_assert_eq!(sol.eval_real(x), sol.eval_real(-x));
        }
    }
}
