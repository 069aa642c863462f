//! Atomic cut-off conformal measures.
//!
//! Atoms sit on the backward orbit of the critical point: `ζ` of depth `n`
//! satisfies `f^n ζ = 0` and `|f^k ζ| ≥ r` for `k < n`, and carries weight
//! `|Df^n(ζ)|^{-δ}` before normalisation. Each atom remembers its image atom,
//! so the transformation rule `μ(fX) = ∫_X |Df|^δ dμ` can be checked box by
//! box.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{preimages, FamilyMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub re: f64,
    pub im: f64,
    /// Normalised mass.
    pub weight: f64,
    pub depth: usize,
    /// Index of the atom `f(ζ)`; `None` for the root.
    pub parent: Option<usize>,
    /// `log |Df(ζ)|`, zero for the root.
    pub log_deriv: f64,
}

impl Atom {
    pub fn point(&self) -> Complex<f64> {
        Complex::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub delta: f64,
    pub cut_radius: f64,
    pub max_depth: usize,
    /// Cut-off series value `Ξ^r_δ(0)` (sum of raw weights).
    pub normalizer: f64,
    pub total_mass: f64,
}

/// Builds the cut-off measure from the preimage tree of 0 up to depth `J`.
pub fn build_cutoff_measure<T: Real>(
    map: &FamilyMap<T>,
    delta: f64,
    cut_radius: f64,
    max_depth: usize,
) -> Result<AtomicMeasure> {
    if !(cut_radius > 0.0) {
        return Err(Error::Domain("cut radius must be positive".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain("delta must be non-negative".into()));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if map.eval(zero) == zero {
        return Err(Error::DegenerateCriticalOrbit);
    }
    let r = T::lit(cut_radius);
    // (point, depth, parent, log|Df(ζ)|, log|Df^n(ζ)|)
    let mut raw: Vec<(Complex<T>, usize, Option<usize>, f64, f64)> = vec![(zero, 0, None, 0.0, 0.0)];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let (w, k, _, _, log_total) = raw[i];
        if k == max_depth {
            continue;
        }
        let mut kids = Vec::new();
        for q in preimages(map, w) {
            if !(q.norm() >= r) {
                continue;
            }
            let l = map.log_deriv(q).as_f64();
            raw.push((q, k + 1, Some(i), l, log_total + l));
            kids.push(raw.len() - 1);
        }
        stack.extend(kids.into_iter().rev());
    }
    let weights: Vec<f64> = raw.iter().map(|a| (-delta * a.4).exp()).collect();
    let normalizer: f64 = weights.iter().sum();
    if !(normalizer > 0.0) || !normalizer.is_finite() {
        return Err(Error::EmptyMeasure);
    }
    let atoms: Vec<Atom> = raw
        .iter()
        .zip(&weights)
        .map(|(a, &w)| Atom {
            re: a.0.re.as_f64(),
            im: a.0.im.as_f64(),
            weight: w / normalizer,
            depth: a.1,
            parent: a.2,
            log_deriv: a.3,
        })
        .collect();
    let total_mass = atoms.iter().map(|a| a.weight).sum();
    Ok(AtomicMeasure { atoms, delta, cut_radius, max_depth, normalizer, total_mass })
}

impl AtomicMeasure {
    /// A measure with given point masses and no tree structure, for
    /// synthetic checks of the scaling fits.
    pub fn from_points(points: &[(Complex<f64>, f64)], delta: f64, cut_radius: f64) -> Self {
        let atoms: Vec<Atom> = points
            .iter()
            .map(|&(z, w)| Atom { re: z.re, im: z.im, weight: w, depth: 0, parent: None, log_deriv: 0.0 })
            .collect();
        let total_mass = atoms.iter().map(|a| a.weight).sum();
        Self { atoms, delta, cut_radius, max_depth: 0, normalizer: total_mass, total_mass }
    }

    /// Mass of the closed disk of `radius` about `center`.
    pub fn measure_of_disk(&self, center: Complex<f64>, radius: f64) -> f64 {
        self.atoms.iter().filter(|a| (a.point() - center).norm() <= radius).map(|a| a.weight).sum()
    }

    pub fn measure_of_box(&self, b: &Cell) -> f64 {
        self.atoms.iter().filter(|a| b.contains(a.point())).map(|a| a.weight).sum()
    }

    /// CSV rows `re,im,weight,depth`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,weight,depth\n");
        for a in &self.atoms {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e},{}\n", a.re, a.im, a.weight, a.depth));
        }
        out
    }
}

/// Closed axis-aligned box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    pub fn contains(&self, z: Complex<f64>) -> bool {
        self.x0 <= z.re && z.re <= self.x1 && self.y0 <= z.im && z.im <= self.y1
    }

    /// Euclidean distance from the box to the origin.
    pub fn distance_to_origin(&self) -> f64 {
        let dx = if self.x0 > 0.0 { self.x0 } else if self.x1 < 0.0 { -self.x1 } else { 0.0 };
        let dy = if self.y0 > 0.0 { self.y0 } else if self.y1 < 0.0 { -self.y1 } else { 0.0 };
        dx.hypot(dy)
    }

    pub fn side(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }
}

/// Tiles `[x0, x1] × [y0, y1]` with square cells of the given side, half-open
/// so that no point belongs to two cells of the grid.
pub fn grid_cells(x0: f64, x1: f64, y0: f64, y1: f64, side: f64) -> Vec<Cell> {
    let nx = ((x1 - x0) / side).ceil().max(1.0) as usize;
    let ny = ((y1 - y0) / side).ceil().max(1.0) as usize;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = x0 + side * i as f64;
            let cy = y0 + side * j as f64;
            // shave the upper edges so neighbouring cells stay disjoint
            let top = |v: f64| v - v.abs().max(1.0) * f64::EPSILON;
            cells.push(Cell { x0: cx, x1: top(cx + side), y0: cy, y1: top(cy + side) });
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub max_residual: f64,
    pub checked: usize,
    /// Boxes containing 0, within the cut radius of 0, or too large for an
    /// injective branch.
    pub skipped: usize,
}

/// Compares `Σ_{ζ ∈ X} w(ζ) |Df(ζ)|^δ` with the mass of the atoms of `f(X)`
/// below the maximal depth, for every admissible box.
pub fn check_covariance(measure: &AtomicMeasure, delta: f64, cells: &[Cell]) -> CovarianceReport {
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    let mut image = vec![false; measure.atoms.len()];
    for cell in cells {
        let dist = cell.distance_to_origin();
        if dist == 0.0 || dist < measure.cut_radius || cell.side() > 0.1f64.min(0.5 * dist) + 1e-12 {
            skipped += 1;
            continue;
        }
        checked += 1;
        let mut lhs = 0.0;
        let mut touched = Vec::new();
        for a in measure.atoms.iter().filter(|a| a.depth > 0 && cell.contains(a.point())) {
            lhs += a.weight * (delta * a.log_deriv).exp();
            let p = a.parent.expect("non-root atoms have a parent");
            if !image[p] {
                image[p] = true;
                touched.push(p);
            }
        }
        let rhs: f64 = touched.iter().map(|&p| measure.atoms[p].weight).sum();
        for p in touched {
            image[p] = false;
        }
        max_residual = max_residual.max((lhs - rhs).abs());
    }
    CovarianceReport { max_residual, checked, skipped }
}
