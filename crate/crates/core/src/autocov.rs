//! Stationary autocovariance estimation for the increment process.
//!
//! The covariance matrix of `m` stationary increments is the symmetric Toeplitz
//! matrix `S[i][j] = gamma(|i - j|)`. Raw sample autocovariances are banded and
//! tapered with a flat-top kernel; the bandwidth is chosen by the empirical
//! rule of the flat-top literature, i.e. the first lag after which `K0`
//! consecutive sample autocorrelations are all insignificant.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum length accepted by [`tapered_autocov_matrix`].
pub const MIN_TAPERED_LEN: usize = 20;

/// Sample autocovariances with a flag for zero-variance input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleAutocov {
    pub gamma: Vec<f64>,
    pub degenerate: bool,
}

/// Biased (divisor `m`) sample autocovariances at lags `0..=max_lag`.
pub fn sample_autocov(z: &[f64], max_lag: usize) -> Result<SampleAutocov> {
    let m = z.len();
    if max_lag >= m {
        return Err(Error::InvalidParameter(format!(
            "max_lag {max_lag} must be below the series length {m}"
        )));
    }
    let mean = z.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let gamma: Vec<f64> = (0..=max_lag)
        .map(|j| {
            centered[j..]
                .iter()
                .zip(&centered[..m - j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / m as f64
        })
        .collect();
    let degenerate = is_degenerate(z, gamma[0]);
    let gamma = if degenerate {
        vec![0.0; max_lag + 1]
    } else {
        gamma
    };
    Ok(SampleAutocov { gamma, degenerate })
}

/// `gamma0` is treated as zero below `1e-12 * (mean |z|)^2`.
fn is_degenerate(z: &[f64], gamma0: f64) -> bool {
    let mean_abs = z.iter().map(|v| v.abs()).sum::<f64>() / z.len() as f64;
    !(gamma0 > 1e-12 * mean_abs * mean_abs) || gamma0 < f64::MIN_POSITIVE
}

/// Flat-top trapezoid: one on `|u| <= 1/2`, linear to zero at `|u| = 1`.
pub fn flat_top_weight(u: f64) -> f64 {
    let a = u.abs();
    if a <= 0.5 {
        1.0
    } else if a < 1.0 {
        2.0 * (1.0 - a)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Bandwidth {
    /// Empirical flat-top rule with the given constant and run length.
    Auto {
        c0: f64,
        k0: usize,
    },
    Fixed(usize),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Auto { c0: 2.0, k0: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AutocovConfig {
    pub bandwidth: Bandwidth,
    /// Smallest admissible eigenvalue relative to `gamma[0]`.
    pub pd_floor: f64,
}

impl Default for AutocovConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::default(),
            pd_floor: 1e-6,
        }
    }
}

impl AutocovConfig {
    /// Covariance forced to `gamma0 * I`.
    pub fn diagonal() -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(0),
            ..Self::default()
        }
    }
}

/// Tapered autocovariances and the Toeplitz covariance they define.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocovEstimate {
    /// Tapered (and possibly diagonally loaded) autocovariances, lags `0..=bandwidth`.
    pub gamma: Vec<f64>,
    /// Untapered sample autocovariances at the same lags.
    pub raw_gamma: Vec<f64>,
    pub bandwidth: usize,
    pub matrix_dim: usize,
    /// Set when `gamma[0]` was raised to restore the eigenvalue floor.
    pub pd_adjusted: bool,
}

impl AutocovEstimate {
    /// Autocovariance at any lag; zero beyond the bandwidth.
    pub fn at_lag(&self, lag: usize) -> f64 {
        self.gamma.get(lag).copied().unwrap_or(0.0)
    }

    /// Dense Toeplitz covariance matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        toeplitz(&self.gamma, self.matrix_dim)
    }

    pub fn factorize(&self) -> Result<SpdFactor> {
        SpdFactor::toeplitz(&self.gamma, self.matrix_dim)
    }
}

pub(crate) fn toeplitz(gamma: &[f64], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        gamma.get(i.abs_diff(j)).copied().unwrap_or(0.0)
    })
}

/// First lag `j` after which `k0` consecutive sample autocorrelations stay
/// below `c0 * sqrt(log10(m) / m)`, capped at `m / 4`.
pub fn select_bandwidth(rho: &[f64], m: usize, c0: f64, k0: usize) -> usize {
    let cap = (m / 4).max(1);
    let threshold = c0 * ((m as f64).log10() / m as f64).sqrt();
    (1..=cap)
        .find(|&j| (0..k0).all(|k| rho.get(j + k).is_none_or(|r| r.abs() < threshold)))
        .unwrap_or(cap)
}

/// Flat-top tapered, banded Toeplitz covariance estimate with the default
/// bandwidth rule and eigenvalue floor.
pub fn tapered_autocov_matrix(z: &[f64]) -> Result<AutocovEstimate> {
    tapered_autocov_matrix_with(z, &AutocovConfig::default())
}

pub fn tapered_autocov_matrix_with(z: &[f64], config: &AutocovConfig) -> Result<AutocovEstimate> {
    let m = z.len();
    if m < MIN_TAPERED_LEN {
        return Err(Error::TooShort {
            required: MIN_TAPERED_LEN,
            actual: m,
        });
    }
    let bandwidth = match config.bandwidth {
        Bandwidth::Fixed(l) => l.min(m - 1),
        Bandwidth::Auto { c0, k0 } => {
            let max_lag = ((m / 4).max(1) + k0).min(m - 1);
            let sample = sample_autocov(z, max_lag)?;
            if sample.degenerate {
                return Err(Error::DegenerateVariance);
            }
            let rho: Vec<f64> = sample.gamma.iter().map(|g| g / sample.gamma[0]).collect();
            select_bandwidth(&rho, m, c0, k0)
        }
    };
    let sample = sample_autocov(z, bandwidth)?;
    if sample.degenerate {
        return Err(Error::DegenerateVariance);
    }
    let raw_gamma = sample.gamma;
    let mut gamma: Vec<f64> = raw_gamma
        .iter()
        .enumerate()
        .map(|(j, g)| {
            if bandwidth == 0 {
                *g
            } else {
                g * flat_top_weight(j as f64 / bandwidth as f64)
            }
        })
        .collect();
    // Lags with zero weight are dropped so the band is exactly `bandwidth`.
    while gamma.len() > 1 && gamma[gamma.len() - 1] == 0.0 {
        gamma.pop();
    }

    let pd_adjusted = enforce_eigen_floor(&mut gamma, m, config.pd_floor)?;
    Ok(AutocovEstimate {
        gamma,
        raw_gamma,
        bandwidth,
        matrix_dim: m,
        pd_adjusted,
    })
}

/// Raises `gamma[0]` when the smallest eigenvalue of the Toeplitz matrix falls
/// below `floor * gamma[0]`. Adding to the diagonal keeps the matrix Toeplitz.
fn enforce_eigen_floor(gamma: &mut [f64], dim: usize, floor: f64) -> Result<bool> {
    if gamma.len() == 1 {
        return Ok(false);
    }
    let threshold = floor * gamma[0];
    let mut shifted = gamma.to_vec();
    shifted[0] -= threshold;
    if SpdFactor::toeplitz(&shifted, dim).is_ok() {
        return Ok(false);
    }
    let eigenvalues = toeplitz(gamma, dim).symmetric_eigenvalues();
    let min_eig = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_eig.is_finite() {
        return Err(Error::Conditioning("non-finite eigenvalue".into()));
    }
    // Solve min_eig + d = floor * (gamma0 + d) with a small relative margin.
    let shift = (threshold - min_eig) / (1.0 - floor) + 1e-12 * gamma[0];
    gamma[0] += shift;
    Ok(true)
}

/// Banded Cholesky factor `S = L L'` of a symmetric positive-definite matrix
/// whose entries vanish more than `band` places off the diagonal.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    dim: usize,
    band: usize,
    /// Row `i` holds `L[i][i - d]` at offset `d` for `d = 0..=band`.
    l: Vec<f64>,
}

impl SpdFactor {
    /// Factors a dense matrix, detecting its bandwidth.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim {
            return Err(Error::InvalidParameter("matrix is not square".into()));
        }
        let band = (0..dim)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .filter(|&(i, j)| matrix[(i, j)] != 0.0)
            .map(|(i, j)| i - j)
            .max()
            .unwrap_or(0);
        Self::banded(dim, band, |i, j| matrix[(i, j)])
    }

    /// Factors the symmetric Toeplitz matrix with first row `gamma`.
    pub fn toeplitz(gamma: &[f64], dim: usize) -> Result<Self> {
        let band = gamma.len().saturating_sub(1).min(dim.saturating_sub(1));
        Self::banded(dim, band, |i, j| gamma[i - j])
    }

    /// `entry(i, j)` is queried for `j <= i <= j + band` only.
    fn banded(dim: usize, band: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = band + 1;
        let mut l = vec![0.0; dim * w];
        for i in 0..dim {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let mut s = entry(i, j);
                for k in lo..j {
                    s -= l[i * w + i - k] * l[j * w + j - k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Conditioning("Cholesky factorization failed".into()));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + i - j] = s / l[j * w];
                }
            }
        }
        Ok(Self { dim, band, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.band + 1) + i - j]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.at(i, i).ln()).sum::<f64>()
    }

    /// `L^{-1} b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut w = b.to_vec();
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.band);
            let s: f64 = (lo..i).map(|k| self.at(i, k) * w[k]).sum();
            w[i] = (w[i] - s) / self.at(i, i);
        }
        w
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        for i in (0..self.dim).rev() {
            let hi = (i + self.band + 1).min(self.dim);
            let s: f64 = (i + 1..hi).map(|k| self.at(k, i) * x[k]).sum();
            x[i] = (x[i] - s) / self.at(i, i);
        }
        x
    }

    /// `v' S^{-1} v`, computed as the squared norm of `L^{-1} v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.forward(v).iter().map(|w| w * w).sum()
    }
}

/// Generalized least-squares mean `(1' S^{-1} z) / (1' S^{-1} 1)`.
pub fn gls_mean(z: &[f64], sigma: &AutocovEstimate) -> Result<f64> {
    if z.len() != sigma.matrix_dim {
        return Err(Error::InvalidParameter(format!(
            "series length {} does not match covariance dimension {}",
            z.len(),
            sigma.matrix_dim
        )));
    }
    let factor = sigma.factorize()?;
    Ok(gls_mean_factored(z, &factor))
}

pub(crate) fn gls_mean_factored(z: &[f64], factor: &SpdFactor) -> f64 {
    let weights = factor.solve(&vec![1.0; z.len()]);
    let num: f64 = weights.iter().zip(z).map(|(w, v)| w * v).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white_noise(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(m: usize, phi: f64, seed: u64) -> Vec<f64> {
        let e = white_noise(m + 200, seed);
        let mut z = vec![0.0; m + 200];
        for t in 1..z.len() {
            z[t] = phi * z[t - 1] + e[t];
        }
        z.split_off(200)
    }

    #[test]
    fn constant_is_degenerate() {
        let s = sample_autocov(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.gamma, vec![0.0, 0.0, 0.0]);
        assert!(matches!(
            tapered_autocov_matrix(&[3.0; 40]),
            Err(Error::DegenerateVariance)
        ));
        assert!(sample_autocov(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn white_noise_autocov() {
        let z = white_noise(100_000, 11);
        let s = sample_autocov(&z, 1).unwrap();
        assert!((s.gamma[0] - 1.0).abs() < 0.02);
        assert!(s.gamma[1].abs() < 0.02);
    }

    #[test]
    fn alternating_autocov() {
        // Closed form for +1,-1,... of even length m: mean 0,
        // gamma0 = 1, gamma1 = -(m - 1) / m.
        let z: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let s = sample_autocov(&z, 1).unwrap();
        assert!((s.gamma[0] - 1.0).abs() < 1e-15);
        assert!((s.gamma[1] + 0.99).abs() < 1e-15);
    }

    #[test]
    fn tapered_white_noise_is_nearly_diagonal() {
        let z = white_noise(500, 3);
        let est = tapered_autocov_matrix(&z).unwrap();
        let s = est.matrix();
        let g0 = est.gamma[0];
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                if i != j {
                    assert!(s[(i, j)].abs() < 0.1 * g0);
                }
            }
        }
    }

    #[test]
    fn tapered_ar1_keeps_first_lag() {
        let z = ar1(2000, 0.5, 5);
        let est = tapered_autocov_matrix(&z).unwrap();
        let rho1 = est.at_lag(1) / est.gamma[0];
        assert!(
            (0.45..=0.55).contains(&rho1),
            "rho1 = {rho1}, L = {}",
            est.bandwidth
        );
    }

    #[test]
    fn taper_shape() {
        let z = ar1(400, 0.7, 8);
        for l in [4usize, 7, 10] {
            let cfg = AutocovConfig {
                bandwidth: Bandwidth::Fixed(l),
                pd_floor: 0.0,
            };
            let est = tapered_autocov_matrix_with(&z, &cfg).unwrap();
            assert!(!est.pd_adjusted);
            for j in 0..=l {
                if 2 * j <= l {
                    assert_eq!(est.at_lag(j), est.raw_gamma[j]);
                }
            }
            assert_eq!(est.at_lag(l), 0.0);
            assert_eq!(est.at_lag(l + 3), 0.0);
        }
    }

    #[test]
    fn banded_factor_matches_dense_cholesky() {
        let gamma = [2.0, 0.5, -0.2, 0.1];
        let dim = 40;
        let f = SpdFactor::toeplitz(&gamma, dim).unwrap();
        let dense = nalgebra::Cholesky::new(toeplitz(&gamma, dim)).unwrap();
        let l = dense.l();
        let log_det = 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>();
        assert!((f.log_det() - log_det).abs() < 1e-12);
        let b: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = dense.solve(&nalgebra::DVector::from_column_slice(&b));
        for (a, e) in f.solve(&b).iter().zip(x.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
        let from_dense = SpdFactor::new(toeplitz(&gamma, dim)).unwrap();
        assert_eq!(from_dense.solve(&b), f.solve(&b));
        assert!(SpdFactor::toeplitz(&[1.0, 0.9, 0.9], 10).is_err());
    }

    #[test]
    fn eigen_floor_restores_positive_definiteness() {
        // A large lag-1 value makes the Toeplitz matrix indefinite.
        let mut gamma = vec![1.0, 0.9, 0.0, 0.0];
        gamma.truncate(2);
        let adjusted = enforce_eigen_floor(&mut gamma, 30, 1e-6).unwrap();
        assert!(adjusted);
        let min_eig = toeplitz(&gamma, 30)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig >= 1e-6 * gamma[0]);
        assert_eq!(gamma[1], 0.9);
    }

    #[test]
    fn gls_mean_examples() {
        let z = white_noise(60, 2);
        let diag = tapered_autocov_matrix_with(&z, &AutocovConfig::diagonal()).unwrap();
        let arithmetic = z.iter().sum::<f64>() / z.len() as f64;
        assert!((gls_mean(&z, &diag).unwrap() - arithmetic).abs() < 1e-12);

        let est = tapered_autocov_matrix(&ar1(80, 0.6, 4)).unwrap();
        let c = vec![2.5; 80];
        assert!((gls_mean(&c, &est).unwrap() - 2.5).abs() < 1e-12);

        assert!(gls_mean(&c[..10], &est).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gls_mean_affine_equivariant(seed in 0u64..1000, a in -5.0f64..5.0, b in -10.0f64..10.0) {
            let z = ar1(60, 0.4, seed);
            let est = tapered_autocov_matrix(&z).unwrap();
            let base = gls_mean(&z, &est).unwrap();
            let moved: Vec<f64> = z.iter().map(|v| a * v + b).collect();
            let got = gls_mean(&moved, &est).unwrap();
            prop_assert!((got - (a * base + b)).abs() < 1e-9 * (1.0 + b.abs() + a.abs()));
        }

        #[test]
        fn matrix_is_symmetric_toeplitz(seed in 0u64..1000) {
            let est = tapered_autocov_matrix(&ar1(50, 0.8, seed)).unwrap();
            let s = est.matrix();
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    prop_assert_eq!(s[(i, j)], est.at_lag(i.abs_diff(j)));
                }
            }
        }
    }
}
