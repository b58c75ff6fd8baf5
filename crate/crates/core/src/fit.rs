//! Column-scaled linear least squares with condition reporting.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coeffs: Vec<Complex64>,
    /// Condition number of the column-normalized design matrix.
    pub cond: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

/// Solves `min |A c - b|` with unit-normalized columns; fails above `max_cond`.
pub fn lstsq(a: &DMatrix<Complex64>, b: &DVector<Complex64>, max_cond: f64) -> Result<LinearFit> {
    let (rows, cols) = a.shape();
    let mut scaled = a.clone();
    let mut scale = vec![1.0; cols];
    for j in 0..cols {
        let n = scaled.column(j).norm();
        if n > 0.0 {
            scale[j] = n;
            scaled.column_mut(j).unscale_mut(n);
        }
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= max_cond) {
        return Err(Error::FitIllConditioned(cond));
    }
    let x = svd.solve(b, 0.0).map_err(|e| Error::Domain(e.to_string()))?;
    let res = &scaled * &x - b;
    let coeffs = (0..cols).map(|j| x[j] / scale[j]).collect();
    Ok(LinearFit { coeffs, cond, rms: res.norm() / (rows as f64).sqrt() })
}

/// Fits samples `(x_i, y_i)` against the basis functions `basis(x)`.
pub fn fit_basis(
    xs: &[f64],
    ys: &[Complex64],
    nbasis: usize,
    basis: impl Fn(f64) -> Vec<Complex64>,
    max_cond: f64,
) -> Result<LinearFit> {
    let a = DMatrix::from_fn(xs.len(), nbasis, |i, j| basis(xs[i])[j]);
    let b = DVector::from_column_slice(ys);
    lstsq(&a, &b, max_cond)
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_coefficients() {
        let xs: Vec<f64> = (1..50).map(|i| i as f64 * 0.3).collect();
        let c = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let ys: Vec<Complex64> = xs.iter().map(|&x| c[0] * x + c[1] * x.ln()).collect();
        let f = fit_basis(&xs, &ys, 2, |x| vec![x.into(), x.ln().into()], 1e8).unwrap();
        assert!((f.coeffs[0] - c[0]).norm() < 1e-12);
        assert!((f.coeffs[1] - c[1]).norm() < 1e-12);
        assert!(f.rms < 1e-12);
    }

    #[test]
    fn flags_collinear_columns() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys = vec![Complex64::new(1.0, 0.0); 9];
        let r = fit_basis(&xs, &ys, 2, |x| vec![x.into(), (2.0 * x).into()], 1e8);
        assert!(matches!(r, Err(Error::FitIllConditioned(_))));
    }

    #[test]
    fn slope_of_line() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
    }
}
