//! KPSS level-stationarity test and augmented Dickey-Fuller unit-root test.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::regression::{ols, OlsFit};
use crate::special::normal_cdf;

use super::{check_input, TestResult};

pub const MIN_STATIONARITY_LEN: usize = 20;

/// Level-stationarity critical values at 10%, 5%, 2.5% and 1%.
pub const KPSS_CRITICAL_VALUES: [f64; 4] = [0.347, 0.463, 0.574, 0.739];
const KPSS_P_LEVELS: [f64; 4] = [0.10, 0.05, 0.025, 0.01];

/// Position of a KPSS statistic relative to the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueBand {
    /// Below the 10% value: the p-value is at least 0.10.
    AboveTable,
    Interpolated,
    /// Beyond the 1% value: the p-value is at most 0.01.
    BelowTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpssResult {
    pub statistic: f64,
    pub p_value: f64,
    pub band: PValueBand,
    pub lags: usize,
}

/// Bartlett bandwidth `floor(4 (m / 100)^(1/4))`.
pub fn kpss_default_lags(m: usize) -> usize {
    (4.0 * (m as f64 / 100.0).powf(0.25)).floor() as usize
}

/// KPSS test of level stationarity with a Bartlett-kernel long-run variance.
pub fn kpss_test(z: &[f64]) -> Result<KpssResult> {
    kpss_test_with_lags(z, kpss_default_lags(z.len()))
}

pub fn kpss_test_with_lags(z: &[f64], lags: usize) -> Result<KpssResult> {
    check_input(z, MIN_STATIONARITY_LEN)?;
    let m = z.len();
    let lags = lags.min(m - 1);
    let mean = z.iter().sum::<f64>() / m as f64;
    let e: Vec<f64> = z.iter().map(|v| v - mean).collect();

    let mut partial = 0.0;
    let eta: f64 = e
        .iter()
        .map(|v| {
            partial += v;
            partial * partial
        })
        .sum::<f64>()
        / (m * m) as f64;

    let mut s2: f64 = e.iter().map(|v| v * v).sum();
    for lag in 1..=lags {
        let prod: f64 = e[lag..].iter().zip(&e[..m - lag]).map(|(a, b)| a * b).sum();
        s2 += 2.0 * prod * (1.0 - lag as f64 / (lags as f64 + 1.0));
    }
    s2 /= m as f64;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let statistic = eta / s2;
    let (p_value, band) = kpss_p_value(statistic);
    Ok(KpssResult {
        statistic,
        p_value,
        band,
        lags,
    })
}

/// Linear interpolation in the critical-value table, clipped to [0.01, 0.10].
pub fn kpss_p_value(statistic: f64) -> (f64, PValueBand) {
    let cv = KPSS_CRITICAL_VALUES;
    if statistic <= cv[0] {
        return (KPSS_P_LEVELS[0], PValueBand::AboveTable);
    }
    if statistic >= cv[3] {
        return (KPSS_P_LEVELS[3], PValueBand::BelowTable);
    }
    let i = (0..3).find(|&i| statistic <= cv[i + 1]).unwrap_or(2);
    let t = (statistic - cv[i]) / (cv[i + 1] - cv[i]);
    let p = KPSS_P_LEVELS[i] + t * (KPSS_P_LEVELS[i + 1] - KPSS_P_LEVELS[i]);
    (p, PValueBand::Interpolated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub nobs: usize,
}

/// Upper bound `floor(12 (m / 100)^(1/4))` of the lag search.
pub fn adf_default_max_lag(m: usize) -> usize {
    (12.0 * (m as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant, lag order chosen by AIC.
pub fn adf_test(z: &[f64]) -> Result<AdfResult> {
    adf_test_with_max_lag(z, adf_default_max_lag(z.len()))
}

pub fn adf_test_with_max_lag(z: &[f64], max_lag: usize) -> Result<AdfResult> {
    check_input(z, MIN_STATIONARITY_LEN)?;
    let diff: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    let max_lag = max_lag.min((diff.len() / 2).saturating_sub(2));

    // Lag selection on the common sample that the longest lag allows.
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let Some(fit) = adf_regression(z, &diff, lag, max_lag) else {
            continue;
        };
        let aic = fit.aic();
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let (_, lags) = best.ok_or(Error::DegenerateVariance)?;

    let fit = adf_regression(z, &diff, lags, lags).ok_or(Error::DegenerateVariance)?;
    let se = fit
        .se
        .as_ref()
        .map(|se| se[1])
        .filter(|s| *s > 0.0 && s.is_finite())
        .ok_or(Error::DegenerateVariance)?;
    let statistic = fit.beta[1] / se;
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p_value(statistic),
        lags,
        nobs: fit.nobs,
    })
}

/// Regresses `dz_t` on `[1, z_{t-1}, dz_{t-1}, ..., dz_{t-lag}]` over the rows
/// available once `sample_lag` differences are held back.
fn adf_regression(z: &[f64], diff: &[f64], lag: usize, sample_lag: usize) -> Option<OlsFit> {
    let rows: Vec<usize> = (sample_lag..diff.len()).collect();
    let y: Vec<f64> = rows.iter().map(|&t| diff[t]).collect();
    let x = DMatrix::from_fn(rows.len(), lag + 2, |r, c| {
        let t = rows[r];
        match c {
            0 => 1.0,
            1 => z[t],
            j => diff[t - (j - 1)],
        }
    });
    ols(&y, &x)
}

/// MacKinnon (1994) response-surface p-value for the constant-only case with
/// a single series.
pub fn mackinnon_p_value(statistic: f64) -> f64 {
    const TAU_MAX: f64 = 2.74;
    const TAU_MIN: f64 = -18.83;
    const TAU_STAR: f64 = -1.61;
    const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
    const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if statistic > TAU_MAX {
        return 1.0;
    }
    if statistic < TAU_MIN {
        return 0.0;
    }
    let coef: &[f64] = if statistic <= TAU_STAR {
        &SMALL_P
    } else {
        &LARGE_P
    };
    let poly = coef.iter().rev().fold(0.0, |acc, c| acc * statistic + c);
    normal_cdf(poly)
}

impl From<KpssResult> for TestResult {
    fn from(r: KpssResult) -> Self {
        TestResult {
            statistic: r.statistic,
            p_value: r.p_value,
        }
    }
}

impl From<AdfResult> for TestResult {
    fn from(r: AdfResult) -> Self {
        TestResult {
            statistic: r.statistic,
            p_value: r.p_value,
        }
    }
}
