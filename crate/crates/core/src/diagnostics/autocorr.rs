//! Sample autocorrelation, partial autocorrelation and the Ljung-Box test.

use serde::Serialize;

use crate::autocov::sample_autocov;
use crate::error::{Error, Result};
use crate::special::chi2_sf;

use super::{check_input, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfPacf {
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    /// Half-width `1.96 / sqrt(m)` of the approximate 95% band.
    pub band: f64,
}

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn acf(z: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_input(z, 2)?;
    let s = sample_autocov(z, max_lag)?;
    if s.degenerate {
        return Err(Error::DegenerateVariance);
    }
    let g0 = s.gamma[0];
    let mut rho: Vec<f64> = s.gamma.iter().map(|g| g / g0).collect();
    rho[0] = 1.0;
    Ok(rho)
}

/// Partial autocorrelations from autocorrelations by the Durbin-Levinson recursion.
pub fn durbin_levinson(rho: &[f64]) -> Vec<f64> {
    let max_lag = rho.len().saturating_sub(1);
    let mut pacf = vec![1.0; max_lag + 1];
    if max_lag == 0 {
        return pacf;
    }
    let mut phi = vec![rho[1]];
    pacf[1] = rho[1];
    for k in 2..=max_lag {
        let num = rho[k] - (1..k).map(|j| phi[j - 1] * rho[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * rho[j]).sum::<f64>();
        let phi_kk = num / den;
        let next: Vec<f64> = (1..k)
            .map(|j| phi[j - 1] - phi_kk * phi[k - j - 1])
            .chain(std::iter::once(phi_kk))
            .collect();
        pacf[k] = phi_kk;
        phi = next;
    }
    pacf
}

pub fn acf_pacf(z: &[f64], max_lag: usize) -> Result<AcfPacf> {
    let acf = acf(z, max_lag)?;
    let pacf = durbin_levinson(&acf);
    Ok(AcfPacf {
        acf,
        pacf,
        band: 1.96 / (z.len() as f64).sqrt(),
    })
}

/// `min(10, m / 5)`.
pub fn ljung_box_default_lag(m: usize) -> usize {
    (m / 5).clamp(1, 10)
}

/// Ljung-Box portmanteau test on the first `h` autocorrelations.
pub fn ljung_box(z: &[f64], h: usize) -> Result<TestResult> {
    check_input(z, 3)?;
    let m = z.len();
    if h == 0 || 2 * h >= m {
        return Err(Error::InvalidParameter(format!(
            "Ljung-Box lag {h} must be positive and below half the length {m}"
        )));
    }
    let rho = acf(z, h)?;
    Ok(ljung_box_from_acf(&rho, m, h))
}

/// `Q = m (m + 2) sum_{j=1}^{h} rho_j^2 / (m - j)` with a chi-square(h) p-value.
pub fn ljung_box_from_acf(rho: &[f64], m: usize, h: usize) -> TestResult {
    let mf = m as f64;
    let q = mf
        * (mf + 2.0)
        * (1..=h)
            .map(|j| rho[j] * rho[j] / (mf - j as f64))
            .sum::<f64>();
    TestResult {
        statistic: q,
        p_value: chi2_sf(q, h as f64),
    }
}
