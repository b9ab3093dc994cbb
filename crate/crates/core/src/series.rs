//! Time-series container, validation, differencing and geometric means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of observations for any estimation routine.
pub const MIN_LEN: usize = 3;

/// An ordered, regularly sampled univariate series of level observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub id: Option<String>,
    /// Thematic group (1-14 in the FRED-QD convention).
    pub group: Option<u8>,
    /// Sampling step, e.g. the step in years.
    pub period: Option<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            id: None,
            group: None,
            period: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_group(mut self, group: u8) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Multiplies every observation by `c`, keeping metadata.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn label(&self) -> &str {
        self.id.as_deref().unwrap_or("<unnamed>")
    }
}

impl From<Vec<f64>> for TimeSeries {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// A single reason a series failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    TooShort { len: usize, required: usize },
    NonFinite { index: usize },
    NonPositive { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ValidationOutcome {
    Ok,
    Invalid(Vec<Violation>),
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationOutcome::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            ValidationOutcome::Ok => &[],
            ValidationOutcome::Invalid(v) => v,
        }
    }

    /// Converts the first violation into an error.
    pub fn into_result(self) -> Result<()> {
        match self {
            ValidationOutcome::Ok => Ok(()),
            ValidationOutcome::Invalid(v) => Err(match v[0] {
                Violation::TooShort { len, required } => Error::TooShort {
                    required,
                    actual: len,
                },
                Violation::NonFinite { index } => Error::NonFinite { index },
                Violation::NonPositive { index, value } => {
                    Error::Domain(format!("non-positive value {value} at index {index}"))
                }
            }),
        }
    }
}

/// Checks length, finiteness and (optionally) strict positivity.
pub fn validate_series(x: &TimeSeries, require_positive: bool) -> ValidationOutcome {
    let mut violations = Vec::new();
    if x.len() < MIN_LEN {
        violations.push(Violation::TooShort {
            len: x.len(),
            required: MIN_LEN,
        });
    }
    for (index, &value) in x.values.iter().enumerate() {
        if !value.is_finite() {
            violations.push(Violation::NonFinite { index });
        } else if require_positive && value <= 0.0 {
            violations.push(Violation::NonPositive { index, value });
        }
    }
    if violations.is_empty() {
        ValidationOutcome::Ok
    } else {
        ValidationOutcome::Invalid(violations)
    }
}

/// The result of differencing a series `order` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferencedSeries {
    pub values: Vec<f64>,
    pub order: usize,
    pub source_len: usize,
}

impl DifferencedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Applies the first difference `n` times.
pub fn difference(x: &[f64], n: usize) -> Result<DifferencedSeries> {
    if n >= x.len() {
        return Err(Error::DegenerateLength {
            order: n,
            len: x.len(),
        });
    }
    let mut values = x.to_vec();
    for _ in 0..n {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(DifferencedSeries {
        values,
        order: n,
        source_len: x.len(),
    })
}

/// Mean of the logarithms; the log of the geometric mean.
pub fn log_geometric_mean(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("geometric mean of an empty sequence".into()));
    }
    let mut acc = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "geometric mean requires positive finite values, got {v} at index {i}"
            )));
        }
        acc += v.ln();
    }
    Ok(acc / x.len() as f64)
}

/// Geometric mean, accumulated in log space.
pub fn geometric_mean(x: &[f64]) -> Result<f64> {
    log_geometric_mean(x).map(f64::exp)
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with divisor `len` (the maximum-likelihood estimator).
pub(crate) fn ml_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
