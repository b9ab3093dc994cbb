//! Normality, stationarity and autocorrelation checks on transformed increments.

mod autocorr;
mod bootstrap;
mod shapiro;
mod stationarity;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::normal_quantile;

pub use autocorr::{
    acf, acf_pacf, durbin_levinson, ljung_box, ljung_box_default_lag, ljung_box_from_acf, AcfPacf,
};
pub use bootstrap::{bootstrap_lambda, bootstrap_windows, BootstrapConfig};
pub use shapiro::shapiro_wilk;
pub use stationarity::{
    adf_default_max_lag, adf_test, adf_test_with_max_lag, kpss_default_lags, kpss_p_value,
    kpss_test, kpss_test_with_lags, mackinnon_p_value, AdfResult, KpssResult, PValueBand,
    KPSS_CRITICAL_VALUES, MIN_STATIONARITY_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub(crate) fn check_input(z: &[f64], min_len: usize) -> Result<()> {
    if z.len() < min_len {
        return Err(Error::TooShort {
            required: min_len,
            actual: z.len(),
        });
    }
    if let Some(index) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi - lo <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    pub alpha: f64,
    /// Largest lag in the correlogram; defaults to `floor(10 log10 m)`.
    pub max_lag: Option<usize>,
    /// Ljung-Box lag; defaults to `min(10, m / 5)`.
    pub ljung_box_lag: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_lag: None,
            ljung_box_lag: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LjungBoxResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lag: usize,
}

/// Pass flags at the configured level. Each is `true` when the increments look
/// like the ideal: normal, level-stationary, free of a unit root and uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdict {
    /// `None` when the sample is outside the Shapiro-Wilk range.
    pub normality: Option<bool>,
    pub kpss: bool,
    pub adf: bool,
    pub ljung_box: bool,
}

impl Verdict {
    pub fn all_pass(&self) -> bool {
        self.normality.unwrap_or(true) && self.kpss && self.adf && self.ljung_box
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub m: usize,
    pub shapiro: Option<TestResult>,
    pub kpss: KpssResult,
    pub adf: AdfResult,
    pub ljung_box: LjungBoxResult,
    pub correlogram: AcfPacf,
    pub qq: Vec<QqPoint>,
    /// Filled in by the caller when sub-sample estimates are requested.
    pub bootstrap_lambdas: Vec<f64>,
    pub verdict: Verdict,
}

/// Standard-normal quantiles at Blom positions against the standardized sorted sample.
pub fn qq_points(z: &[f64]) -> Result<Vec<QqPoint>> {
    check_input(z, 3)?;
    let m = z.len();
    let mean = z.iter().sum::<f64>() / m as f64;
    let sd = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64).sqrt();
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, v)| QqPoint {
            theoretical: normal_quantile((i as f64 + 1.0 - 0.375) / (m as f64 + 0.25)),
            sample: (v - mean) / sd,
        })
        .collect())
}

/// Runs the full battery on a sequence of transformed increments.
pub fn diagnose(z: &[f64], config: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    check_input(z, MIN_STATIONARITY_LEN)?;
    let m = z.len();
    let alpha = config.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }

    let shapiro = if m <= 5000 {
        Some(shapiro_wilk(z)?)
    } else {
        None
    };
    let kpss = kpss_test(z)?;
    let adf = adf_test(z)?;
    let lb_lag = config
        .ljung_box_lag
        .unwrap_or_else(|| ljung_box_default_lag(m));
    let lb = ljung_box(z, lb_lag)?;
    let max_lag = config
        .max_lag
        .unwrap_or_else(|| (10.0 * (m as f64).log10()).floor() as usize)
        .clamp(1, m - 1);
    let correlogram = acf_pacf(z, max_lag)?;

    let verdict = Verdict {
        normality: shapiro.map(|s| s.p_value > alpha),
        // The KPSS p-value is clipped to the table, so compare it inclusively.
        kpss: kpss.p_value >= alpha && kpss.band != PValueBand::BelowTable,
        adf: adf.p_value < alpha,
        ljung_box: lb.p_value > alpha,
    };
    Ok(DiagnosticsReport {
        m,
        shapiro,
        kpss,
        adf,
        ljung_box: LjungBoxResult {
            statistic: lb.statistic,
            p_value: lb.p_value,
            lag: lb_lag,
        },
        correlogram,
        qq: qq_points(z)?,
        bootstrap_lambdas: Vec::new(),
        verdict,
    })
}
