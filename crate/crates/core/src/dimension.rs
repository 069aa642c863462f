//! Box counting on escape-time rasters and power-law fits of disk masses.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::AtomicMeasure;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::regression::{fit_line, LinearFit};

/// Default escape horizon.
pub const DEFAULT_HORIZON: u64 = 5000;
/// Smallest escape horizon accepted.
pub const MIN_HORIZON: u64 = 1000;
/// Orbits returning this close to a checkpoint are treated as captured by a
/// cycle and therefore bounded.
pub const CYCLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub x0: f64,
    pub y0: f64,
    pub side: f64,
}

impl Square {
    pub fn centered(cx: f64, cy: f64, side: f64) -> Self {
        Self { x0: cx - side / 2.0, y0: cy - side / 2.0, side }
    }

    fn cells_per_side(&self, eps: f64) -> usize {
        ((self.side / eps).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Escaping,
    Bounded,
    Boundary,
}

/// Whether the orbit of `z` leaves the escape disk within `horizon` steps.
/// Orbits that come back to within [`CYCLE_TOL`] of a checkpoint (taken at
/// powers of two) are reported bounded early.
pub fn escapes<M: Dynamics<f64>>(map: &M, z: Complex<f64>, horizon: u64) -> bool {
    let r2 = map.escape_radius().powi(2);
    let mut z = z;
    let mut saved = z;
    let mut next_save = 1;
    for k in 1..=horizon {
        z = map.apply(z);
        if z.norm_sqr() > r2 {
            return true;
        }
        if (z - saved).norm_sqr() < CYCLE_TOL * CYCLE_TOL {
            return false;
        }
        if k == next_save {
            saved = z;
            next_save *= 2;
        }
    }
    false
}

/// Classifies the closed cell with lower-left corner `(x, y)` and side `eps`
/// from an `s × s` lattice of subsamples spanning it edge to edge, so a set on
/// a grid line is seen by the cells on both sides.
pub fn classify_cell<M: Dynamics<f64>>(map: &M, x: f64, y: f64, eps: f64, s: usize, horizon: u64) -> CellClass {
    let mut seen = [false; 2];
    let step = eps / (s - 1) as f64;
    for i in 0..s {
        for j in 0..s {
            let z = Complex::new(x + step * i as f64, y + step * j as f64);
            seen[escapes(map, z, horizon) as usize] = true;
            if seen[0] && seen[1] {
                return CellClass::Boundary;
            }
        }
    }
    if seen[1] {
        CellClass::Escaping
    } else {
        CellClass::Bounded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub grid_sizes: Vec<f64>,
    pub counts: Vec<u64>,
    /// Slope of `log N` against `log(1/ε)`.
    pub slope: f64,
    pub stderr: f64,
    pub r2: f64,
}

fn check_resolutions(resolutions: &[f64]) -> Result<()> {
    if resolutions.len() < 2 {
        return Err(Error::InsufficientData { usable: resolutions.len(), needed: 2 });
    }
    if resolutions.iter().any(|e| !(*e > 0.0)) || resolutions.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("resolutions must be positive and strictly decreasing".into()));
    }
    Ok(())
}

/// Counts boundary cells at every resolution using any cell classifier
/// `classify(x, y, eps)`.
pub fn box_count_with<F>(window: Square, resolutions: &[f64], classify: F) -> Result<BoxCount>
where
    F: Fn(f64, f64, f64) -> CellClass + Sync,
{
    check_resolutions(resolutions)?;
    let counts: Vec<u64> = resolutions
        .iter()
        .map(|&eps| {
            let n = window.cells_per_side(eps);
            (0..n)
                .into_par_iter()
                .map(|iy| {
                    let y = window.y0 + iy as f64 * eps;
                    (0..n)
                        .filter(|&ix| classify(window.x0 + ix as f64 * eps, y, eps) == CellClass::Boundary)
                        .count() as u64
                })
                .sum()
        })
        .collect();
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptySet);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = resolutions
        .iter()
        .zip(&counts)
        .filter(|(_, c)| **c > 0)
        .map(|(e, c)| (-e.ln(), (*c as f64).ln()))
        .unzip();
    let fit = fit_line(&x, &y)?;
    Ok(BoxCount {
        grid_sizes: resolutions.to_vec(),
        counts,
        slope: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
    })
}

/// Box-counting dimension of the boundary of the escape set in `window`.
pub fn box_dimension<M: Dynamics<f64>>(
    map: &M,
    window: Square,
    resolutions: &[f64],
    horizon: u64,
    subsamples: usize,
) -> Result<BoxCount> {
    if horizon < MIN_HORIZON {
        return Err(Error::Precondition(format!("escape horizon {horizon} below {MIN_HORIZON}")));
    }
    if subsamples < 2 {
        return Err(Error::Precondition("a cell needs at least 2 × 2 subsamples".into()));
    }
    box_count_with(window, resolutions, |x, y, eps| classify_cell(map, x, y, eps, subsamples, horizon))
}

/// `side · 2^{-k}` for `k = k_min..=k_max`.
pub fn dyadic_resolutions(side: f64, k_min: i32, k_max: i32) -> Vec<f64> {
    (k_min..=k_max).map(|k| side * 2f64.powi(-k)).collect()
}

/// Cell classes on one grid, rows from the top of the window down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    /// Binary PGM (P5, 8 bit).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Boundary cells black, bounded grey, escaping white.
pub fn classification_raster<M: Dynamics<f64>>(
    map: &M,
    window: Square,
    eps: f64,
    horizon: u64,
    subsamples: usize,
) -> Raster {
    let n = window.cells_per_side(eps);
    let pixels = (0..n)
        .into_par_iter()
        .rev()
        .flat_map_iter(|iy| {
            let y = window.y0 + iy as f64 * eps;
            (0..n).map(move |ix| match classify_cell(map, window.x0 + ix as f64 * eps, y, eps, subsamples, horizon) {
                CellClass::Boundary => 0u8,
                CellClass::Bounded => 160,
                CellClass::Escaping => 255,
            })
        })
        .collect();
    Raster { width: n, height: n, pixels }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fitted exponent `σ` in `μ(D_r) ≈ r^σ`.
    pub sigma: f64,
    pub stderr: f64,
    pub r2: f64,
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    /// Radii whose disk carried no mass.
    pub dropped: Vec<f64>,
}

fn disk_masses(measure: &AtomicMeasure, center: Complex<f64>, radii: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("radii must be positive and strictly decreasing".into()));
    }
    let mut kept = Vec::with_capacity(radii.len());
    let mut masses = Vec::with_capacity(radii.len());
    let mut dropped = Vec::new();
    for &r in radii {
        let m = measure.measure_of_disk(center, r);
        if m > 0.0 {
            kept.push(r);
            masses.push(m);
        } else {
            dropped.push(r);
        }
    }
    if kept.len() < 4 {
        return Err(Error::InsufficientData { usable: kept.len(), needed: 4 });
    }
    Ok((kept, masses, dropped))
}

/// Regression of `log μ(D_r)` on `log r`.
pub fn scaling_exponent(measure: &AtomicMeasure, center: Complex<f64>, radii: &[f64]) -> Result<ScalingFit> {
    let (radii, masses, dropped) = disk_masses(measure, center, radii)?;
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok(ScalingFit { sigma: fit.slope, stderr: fit.slope_stderr, r2: fit.r2, radii, masses, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCorrectionFit {
    /// `φ(r) = μ(D_r)/r²` against `log(1/r)`.
    pub fit: LinearFit,
    /// Growing, and linear with R² of at least 0.9. Consistency only.
    pub consistent: bool,
    pub radii: Vec<f64>,
    pub phi: Vec<f64>,
    pub dropped: Vec<f64>,
}

pub fn log_correction_fit(measure: &AtomicMeasure, center: Complex<f64>, radii: &[f64]) -> Result<LogCorrectionFit> {
    let (radii, masses, dropped) = disk_masses(measure, center, radii)?;
    let x: Vec<f64> = radii.iter().map(|r| -r.ln()).collect();
    let phi: Vec<f64> = masses.iter().zip(&radii).map(|(m, r)| m / (r * r)).collect();
    let fit = fit_line(&x, &phi)?;
    let consistent = fit.slope > 0.0 && fit.r2 >= 0.9;
    Ok(LogCorrectionFit { fit, consistent, radii, phi, dropped })
}

/// Radii `4 r_cut · 2^k` up to `max_radius`, largest first.
pub fn default_radii(cut_radius: f64, max_radius: f64) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut r = 4.0 * cut_radius;
    while r <= max_radius {
        radii.push(r);
        r *= 2.0;
    }
    radii.reverse();
    radii
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FamilyMap;
    use proptest::prelude::*;

    /// Atoms on rings between consecutive radii so that `μ(D_r) = law(r)`
    /// holds exactly at every radius.
    fn ring_measure(radii: &[f64], law: impl Fn(f64) -> f64) -> AtomicMeasure {
        let mut points = Vec::new();
        for w in radii.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let mass = law(w[0]) - law(w[1]);
            for k in 0..4 {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 + 0.3;
                points.push((Complex::from_polar(mid, t), mass / 4.0));
            }
        }
        points.push((Complex::new(0.0, 0.0), law(*radii.last().unwrap())));
        AtomicMeasure::from_points(&points, 1.0, 0.0)
    }

    fn geometric_radii(k: usize) -> Vec<f64> {
        (0..k).map(|i| 0.5f64.powi(i as i32)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let radii = geometric_radii(8);
        for sigma in [0.5, 1.0, 1.7, 2.0] {
            let m = ring_measure(&radii, |r| r.powf(sigma));
            let f = scaling_exponent(&m, Complex::new(0.0, 0.0), &radii).unwrap();
            assert!((f.sigma - sigma).abs() < 1e-3, "{sigma}: {}", f.sigma);
        }
    }

    #[test]
    fn too_few_radii() {
        let m = ring_measure(&geometric_radii(6), |r| r.powf(1.7));
        let e = scaling_exponent(&m, Complex::new(0.0, 0.0), &[1.0, 0.5]).unwrap_err();
        assert!(matches!(e, Error::InsufficientData { usable: 2, .. }));
        // Empty disks are dropped, not fitted.
        let far = Complex::new(100.0, 0.0);
        let e = scaling_exponent(&m, far, &geometric_radii(6)).unwrap_err();
        assert!(matches!(e, Error::InsufficientData { usable: 0, .. }));
        assert!(scaling_exponent(&m, Complex::new(0.0, 0.0), &[0.5, 1.0, 0.25, 0.125]).is_err());
    }

    #[test]
    fn log_correction_examples() {
        let radii = geometric_radii(10);
        let m = ring_measure(&radii[1..], |r| r * r * (1.0 / r).ln());
        let f = log_correction_fit(&m, Complex::new(0.0, 0.0), &radii[1..]).unwrap();
        assert!(f.fit.r2 >= 0.999 && f.fit.slope > 0.0 && f.consistent);
        let m = ring_measure(&radii, |r| r * r);
        let f = log_correction_fit(&m, Complex::new(0.0, 0.0), &radii).unwrap();
        assert!(f.fit.slope.abs() < 1e-9 && !f.consistent);
    }

    #[test]
    fn default_radii_are_anchored() {
        let r = default_radii(0.01, 1.0);
        assert_eq!(r.last(), Some(&0.04));
        assert!(r.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() < 1e-15));
        assert!(r[0] <= 1.0);
    }

    #[test]
    fn full_square_stub_has_dimension_two() {
        let w = Square::centered(0.0, 0.0, 4.0);
        let b = box_count_with(w, &dyadic_resolutions(4.0, 2, 8), |_, _, _| CellClass::Boundary).unwrap();
        assert!((b.slope - 2.0).abs() < 1e-12);
        assert_eq!(b.counts.last(), Some(&(256 * 256)));
    }

    #[test]
    fn uniform_window_is_empty() {
        let w = Square::centered(10.0, 10.0, 1.0);
        let map = FamilyMap::quadratic(Complex::new(0.0, 0.0));
        let e = box_dimension(&map, w, &dyadic_resolutions(1.0, 2, 4), 1000, 2).unwrap_err();
        assert_eq!(e, Error::EmptySet);
    }

    #[test]
    fn preconditions() {
        let w = Square::centered(0.0, 0.0, 4.0);
        let map = FamilyMap::quadratic(Complex::new(0.0, 0.0));
        assert!(box_dimension(&map, w, &[0.5, 0.25], 10, 2).is_err());
        assert!(box_dimension(&map, w, &[0.25, 0.5], 1000, 2).is_err());
        assert!(box_dimension(&map, w, &[0.5, 0.25], 1000, 1).is_err());
    }

    #[test]
    fn circle_dimension_is_stable() {
        let map = FamilyMap::quadratic(Complex::new(0.0, 0.0));
        let w = Square::centered(0.0, 0.0, 4.0);
        let coarse = box_dimension(&map, w, &dyadic_resolutions(4.0, 4, 8), 1000, 2).unwrap();
        let fine = box_dimension(&map, w, &dyadic_resolutions(4.0, 5, 9), 1000, 2).unwrap();
        let dense = box_dimension(&map, w, &dyadic_resolutions(4.0, 5, 9), 1000, 4).unwrap();
        assert!((coarse.slope - 1.0).abs() < 0.05 && (fine.slope - 1.0).abs() < 0.05);
        assert!((coarse.slope - fine.slope).abs() < 0.1);
        assert!((dense.slope - fine.slope).abs() < 0.02, "{} {}", dense.slope, fine.slope);
        assert!(fine.counts.windows(2).all(|c| c[1] >= c[0]));
    }

    #[test]
    fn escape_classification() {
        let map = FamilyMap::quadratic(Complex::new(0.0, 0.0));
        assert!(!escapes(&map, Complex::new(0.5, 0.0), 1000));
        assert!(escapes(&map, Complex::new(1.01, 0.0), 1000));
        let seg = FamilyMap::quadratic(Complex::new(-2.0, 0.0));
        assert!(!escapes(&seg, Complex::new(0.3, 0.0), 1000));
        assert!(escapes(&seg, Complex::new(0.3, 1e-6), 1000));
    }

    #[test]
    fn pgm_header_and_size() {
        let map = FamilyMap::quadratic(Complex::new(0.0, 0.0));
        let r = classification_raster(&map, Square::centered(0.0, 0.0, 4.0), 0.25, 1000, 2);
        let pgm = r.to_pgm();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
        assert!(r.pixels.contains(&0) && r.pixels.contains(&160) && r.pixels.contains(&255));
    }

    proptest! {
        #[test]
        fn power_law_recovery(sigma in 0.5f64..2.0) {
            let radii = geometric_radii(7);
            let m = ring_measure(&radii, |r| r.powf(sigma));
            let f = scaling_exponent(&m, Complex::new(0.0, 0.0), &radii).unwrap();
            prop_assert!((f.sigma - sigma).abs() < 1e-3);
        }
    }
}
