//! Ordinary least squares on small data sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 0 when `y` has no spread.
    pub r2: f64,
    /// Standard error of the slope; 0 for two points.
    pub slope_stderr: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Fits `y ≈ intercept + slope·x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Degenerate(format!("{} abscissae for {} ordinates", x.len(), y.len())));
    }
    let usable = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).count();
    if usable != x.len() || usable < 2 {
        return Err(Error::InsufficientData { usable, needed: 2.max(x.len()) });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 0.0 } else { 1.0 - ss_res / syy };
    let slope_stderr = if x.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, r2, slope_stderr, points: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let f = fit_line(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r2 - 1.0).abs() < 1e-15);
        assert_eq!(f.predict(4.0), 9.0);
        assert_eq!(f.slope_stderr, 0.0);
    }

    #[test]
    fn slope_stderr_oracle() {
        // Slope 0.96, residuals ±0.04, ±0.12: SS_res = 0.032, Sxx = 5.
        let f = fit_line(&[0.0, 1.0, 2.0, 3.0], &[0.1, 0.9, 2.1, 2.9]).unwrap();
        assert!((f.slope - 0.96).abs() < 1e-14);
        assert!((f.slope_stderr - 0.0032f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn flat_data_has_zero_r2() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r2, 0.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0, f64::NAN]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_noiseless_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 3usize..20) {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 1.0).collect();
            let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
            let f = fit_line(&x, &y).unwrap();
            prop_assert!((f.slope - b).abs() < 1e-9 && (f.intercept - a).abs() < 1e-9);
            prop_assert!(f.r2 == 0.0 || f.r2 > 1.0 - 1e-9);
        }
    }
}
