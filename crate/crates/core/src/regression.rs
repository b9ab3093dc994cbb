//! Small dense least-squares helpers shared by the unit-root test and the
//! autoregressive forecaster.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub beta: Vec<f64>,
    pub ssr: f64,
    pub nobs: usize,
    /// Standard errors; `None` when the Gram matrix is singular.
    pub se: Option<Vec<f64>>,
}

impl OlsFit {
    /// Gaussian AIC, `-2 llf + 2 k`, matching the usual regression output.
    pub fn aic(&self) -> f64 {
        let n = self.nobs as f64;
        let llf = -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0);
        -2.0 * llf + 2.0 * self.beta.len() as f64
    }
}

/// Ordinary least squares through the Cholesky factor of `X'X`.
pub(crate) fn ols(y: &[f64], x: &DMatrix<f64>) -> Option<OlsFit> {
    let n = y.len();
    let k = x.ncols();
    if x.nrows() != n || n <= k {
        return None;
    }
    let yv = DVector::from_column_slice(y);
    let gram = x.transpose() * x;
    let chol = gram.cholesky()?;
    let beta = chol.solve(&(x.transpose() * &yv));
    let resid = &yv - x * &beta;
    let ssr = resid.norm_squared();
    let s2 = ssr / (n - k) as f64;
    let inv = chol.inverse();
    let se = (0..k).map(|i| (s2 * inv[(i, i)]).sqrt()).collect();
    Some(OlsFit {
        beta: beta.iter().copied().collect(),
        ssr,
        nobs: n,
        se: Some(se),
    })
}

/// Least squares with an intercept, `y ~ c + X b`, tolerant of constant or
/// collinear regressors. Regressors are centered and the slopes taken from
/// the pseudo-inverse of the centered Gram matrix, so a constant column gets
/// a zero slope. Returns `[c, b_1, ..., b_k]`.
pub(crate) fn lstsq_intercept(y: &[f64], x: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (n, k) = (x.nrows(), x.ncols());
    if n != y.len() || n == 0 {
        return None;
    }
    let means: Vec<f64> = (0..k).map(|j| x.column(j).mean()).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, k, |i, j| x[(i, j)] - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * yc;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = top * 1e-12 * k.max(1) as f64;
    let mut slopes = DVector::zeros(k);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > tol {
            let v = eig.eigenvectors.column(i);
            slopes += v * (v.dot(&rhs) / ev);
        }
    }
    let c = y_mean - slopes.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    if !c.is_finite() || slopes.iter().any(|b| !b.is_finite()) {
        return None;
    }
    Some(std::iter::once(c).chain(slopes.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let fit = ols(&y, &x).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert!((fit.beta[1] - 3.0).abs() < 1e-12);
        assert!(fit.ssr < 1e-20);
    }

    #[test]
    fn constant_regressor_gets_zero_slope() {
        let x = DMatrix::from_fn(6, 2, |_, j| if j == 0 { 1.0 } else { 0.5 });
        let y = vec![0.5; 6];
        assert!(ols(&y, &x).is_none());
        let beta = lstsq_intercept(&y, &DMatrix::from_element(6, 1, 0.5)).unwrap();
        assert_eq!(beta, vec![0.5, 0.0]);
    }

    #[test]
    fn intercept_fit_matches_ols() {
        let x = DMatrix::from_fn(8, 2, |i, j| ((i * (j + 2)) as f64).sin());
        let y: Vec<f64> = (0..8)
            .map(|i| 1.0 + 2.0 * x[(i, 0)] - x[(i, 1)] + 0.01 * (i as f64).cos())
            .collect();
        let full = DMatrix::from_fn(8, 3, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let a = ols(&y, &full).unwrap().beta;
        let b = lstsq_intercept(&y, &x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
