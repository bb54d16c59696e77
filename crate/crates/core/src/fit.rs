//! Least-squares fits and measured constants.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("design matrix is singular")]
    Singular,
    #[error("non-finite input at position {0}")]
    NonFinite(usize),
}

/// A constant that is measured or fitted, never assumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub value: Complex64,
    pub std_error: f64,
    pub context: String,
}

impl FittedConstant {
    pub fn real(value: f64, std_error: f64, context: impl Into<String>) -> Self {
        Self {
            value: Complex64::new(value, 0.0),
            std_error: std_error.abs(),
            context: context.into(),
        }
    }

    pub fn complex(value: Complex64, std_error: f64, context: impl Into<String>) -> Self {
        Self {
            value,
            std_error: std_error.abs(),
            context: context.into(),
        }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

/// Ordinary least squares `y ≈ a + b·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_err: f64,
    pub slope_err: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit, FitError> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            found: n,
        });
    }
    if let Some(i) = (0..n).find(|&i| !(x[i].is_finite() && y[i].is_finite())) {
        return Err(FitError::NonFinite(i));
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::Singular);
    }
    let sxy: f64 = (0..n).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (intercept_err, slope_err) = if n > 2 {
        let rss: f64 = (0..n)
            .map(|i| (y[i] - intercept - slope * x[i]).powi(2))
            .sum();
        let s2 = rss / (nf - 2.0);
        let sum_x2: f64 = x[..n].iter().map(|v| v * v).sum();
        ((s2 * sum_x2 / (nf * sxx)).sqrt(), (s2 / sxx).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        intercept,
        slope,
        intercept_err,
        slope_err,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit, FitError> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

/// Complex least squares `y ≈ Σ_j c_j cols[j]` by normal equations; returns the coefficients and
/// the residual norm.
pub fn complex_lstsq(
    cols: &[Vec<Complex64>],
    y: &[Complex64],
) -> Result<(Vec<Complex64>, f64), FitError> {
    let p = cols.len();
    let n = y.len();
    if n < p || p == 0 {
        return Err(FitError::TooFewPoints {
            needed: p.max(1),
            found: n,
        });
    }
    let a = faer::Mat::<Complex64>::from_fn(n, p, |i, j| cols[j][i]);
    let b = faer::Mat::<Complex64>::from_fn(n, 1, |i, _| y[i]);
    let qr = a.col_piv_qr();
    let r_diag_min = (0..p)
        .map(|i| qr.R()[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    let r_diag_max = (0..p).map(|i| qr.R()[(i, i)].norm()).fold(0.0, f64::max);
    if r_diag_max == 0.0 || r_diag_min <= 1e-14 * r_diag_max {
        return Err(FitError::Singular);
    }
    use faer::linalg::solvers::SolveLstsq;
    let sol = qr.solve_lstsq(&b);
    let coeffs: Vec<Complex64> = (0..p).map(|j| sol[(j, 0)]).collect();
    let resid = (0..n)
        .map(|i| {
            let fit: Complex64 = (0..p).map(|j| coeffs[j] * cols[j][i]).sum();
            (y[i] - fit).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Ok((coeffs, resid))
}

/// Relative spread `(max - min) / |mean|` of a sample.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / mean.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 0.5).abs() < 1e-14);
        assert!(f.slope_err < 1e-12);
    }

    #[test]
    fn power_law_slope() {
        let x = [0.4, 0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(matches!(
            line_fit(&[1.0], &[1.0]),
            Err(FitError::TooFewPoints { .. })
        ));
        assert_eq!(line_fit(&[1.0, 1.0], &[0.0, 1.0]), Err(FitError::Singular));
    }

    #[test]
    fn complex_lstsq_recovers_coefficients() {
        let c0 = Complex64::new(1.5, -0.5);
        let c1 = Complex64::new(0.0, 2.0);
        let u: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let v: Vec<Complex64> = (0..6)
            .map(|i| Complex64::new(1.0, (i * i) as f64))
            .collect();
        let y: Vec<Complex64> = (0..6).map(|i| c0 * u[i] + c1 * v[i]).collect();
        let (c, r) = complex_lstsq(&[u, v], &y).unwrap();
        assert!((c[0] - c0).norm() < 1e-12 && (c[1] - c1).norm() < 1e-12);
        assert!(r < 1e-10);
    }
}
