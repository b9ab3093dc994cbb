//! Expanding-window one-step-ahead forecasts from an autoregression fitted to
//! transformed increments, and the mean absolute scaled error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::SeriesTransform;
use crate::regression::lstsq_intercept;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Number of final observations forecast one step ahead.
    pub holdout: usize,
    pub ar_order: usize,
    /// Minimum number of levels before the first forecast origin.
    pub min_train: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            holdout: 48,
            ar_order: 4,
            min_train: 40,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.holdout < 8 {
            return Err(Error::InvalidParameter(format!(
                "holdout must be at least 8, got {}",
                self.holdout
            )));
        }
        if self.min_train < 40 {
            return Err(Error::InvalidParameter(format!(
                "min_train must be at least 40, got {}",
                self.min_train
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastPoint {
    /// Position of the forecast target in the input series.
    pub index: usize,
    pub forecast: f64,
    pub actual: f64,
    pub clipped: bool,
}

impl ForecastPoint {
    pub fn error(&self) -> f64 {
        self.actual - self.forecast
    }
}

/// Least-squares AR(p) with intercept; returns `[c, phi_1, ..., phi_p]`.
fn fit_ar(z: &[f64], p: usize) -> Result<Vec<f64>> {
    let rows = z.len().saturating_sub(p);
    if rows < p + 2 {
        return Err(Error::TooShort {
            required: 2 * p + 2,
            actual: z.len(),
        });
    }
    let x = DMatrix::from_fn(rows, p, |r, c| z[p + r - c - 1]);
    lstsq_intercept(&z[p..], &x)
        .ok_or_else(|| Error::EstimationFailure("autoregression fit failed".into()))
}

fn predict_ar(z: &[f64], beta: &[f64]) -> f64 {
    let n = z.len();
    beta[0] + (1..beta.len()).map(|j| beta[j] * z[n - j]).sum::<f64>()
}

/// One-step forecasts of the final `holdout` levels, refitting on an
/// expanding window at every origin.
pub fn forecast_series(
    x: &[f64],
    transform: &SeriesTransform,
    cfg: &ForecastConfig,
) -> Result<Vec<ForecastPoint>> {
    cfg.validate()?;
    let t = x.len();
    if t < cfg.min_train + cfg.holdout {
        return Err(Error::TooShort {
            required: cfg.min_train + cfg.holdout,
            actual: t,
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    (t - cfg.holdout..t)
        .map(|target| {
            let train = &x[..target];
            let z = transform.apply(train)?;
            let beta = fit_ar(&z, cfg.ar_order)?;
            let step = transform.integrate(train, predict_ar(&z, &beta))?;
            if !step.value.is_finite() {
                return Err(Error::EstimationFailure(format!(
                    "non-finite forecast for index {target}"
                )));
            }
            Ok(ForecastPoint {
                index: target,
                forecast: step.value,
                actual: x[target],
                clipped: step.clipped,
            })
        })
        .collect()
}

/// Mean absolute first difference of the training levels: the in-sample
/// error of the random-walk forecast.
pub fn naive_scale(train: &[f64]) -> Result<f64> {
    if train.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: train.len(),
        });
    }
    let diffs: Vec<f64> = train.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = mean_abs(&diffs);
    if scale > 0.0 && scale.is_finite() {
        Ok(scale)
    } else {
        Err(Error::UndefinedScale)
    }
}

fn mean_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
}

/// Forecast errors divided by the naive in-sample scale.
pub fn scaled_errors(errors: &[f64], train: &[f64]) -> Result<Vec<f64>> {
    let scale = naive_scale(train)?;
    Ok(errors.iter().map(|e| e / scale).collect())
}

/// Mean absolute scaled error with the non-seasonal naive scale.
pub fn mase(errors: &[f64], train: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::TooShort {
            required: 1,
            actual: 0,
        });
    }
    Ok(mean_abs(errors) / naive_scale(train)?)
}
