//! Normalized Box-Cox power family and the composed transform-then-difference
//! pipeline used to obtain ergodic increments.
//!
//! For `lambda != 0` the transform is `(x^lambda - 1) / (theta^(lambda - 1) * lambda)`,
//! and `theta * ln x` at `lambda = 0`, where `theta` is the geometric mean of the
//! level observations. The normalization by `theta` makes the profile likelihood
//! free of the Jacobian term and invariant to rescaling the data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{difference, log_geometric_mean, DifferencedSeries, TimeSeries};

/// Below this magnitude the logarithmic branch is used.
pub const LAMBDA_EPS: f64 = 1e-7;

/// Power parameter, differencing order and geometric-mean normalizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub lambda: f64,
    pub n_diffs: usize,
    pub theta_hat: f64,
}

impl TransformSpec {
    pub fn new(lambda: f64, n_diffs: usize, theta_hat: f64) -> Result<Self> {
        if !(theta_hat > 0.0) || !theta_hat.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "geometric-mean normalizer must be positive, got {theta_hat}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            n_diffs,
            theta_hat,
        })
    }

    /// Builds a spec whose normalizer is the geometric mean of `levels`.
    pub fn for_levels(levels: &[f64], lambda: f64, n_diffs: usize) -> Result<Self> {
        let theta_hat = log_geometric_mean(levels)?.exp();
        Self::new(lambda, n_diffs, theta_hat)
    }

    fn is_log(&self) -> bool {
        self.lambda.abs() < LAMBDA_EPS
    }
}

/// Normalized Box-Cox transform of a single positive observation.
pub fn boxcox(x: f64, spec: &TransformSpec) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Box-Cox requires x > 0, got {x}")));
    }
    Ok(boxcox_log(x.ln(), spec.lambda, spec.theta_hat.ln()))
}

/// Transform evaluated from `ln x` and `ln theta`.
#[inline]
pub(crate) fn boxcox_log(log_x: f64, lambda: f64, log_theta: f64) -> f64 {
    if lambda.abs() < LAMBDA_EPS {
        log_theta.exp() * log_x
    } else {
        (lambda * log_x).exp_m1() / lambda * ((1.0 - lambda) * log_theta).exp()
    }
}

/// Exact inverse of [`boxcox`].
pub fn boxcox_inverse(y: f64, spec: &TransformSpec) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("cannot invert non-finite value {y}")));
    }
    if spec.is_log() {
        return Ok((y / spec.theta_hat).exp());
    }
    let lambda = spec.lambda;
    // x^lambda - 1 = y * theta^(lambda - 1) * lambda
    let u = y * spec.theta_hat.powf(lambda - 1.0) * lambda;
    if !(u > -1.0) {
        return Err(Error::Domain(format!(
            "value {y} lies outside the image of the transform at lambda = {lambda}"
        )));
    }
    let x = (u.ln_1p() / lambda).exp();
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!(
            "inverse of {y} overflows at lambda = {lambda}"
        )))
    }
}

/// Smallest transform value that can be inverted, if the image is bounded below.
pub fn image_lower_bound(spec: &TransformSpec) -> Option<f64> {
    if spec.is_log() || spec.lambda < 0.0 {
        None
    } else {
        Some(-1.0 / (spec.theta_hat.powf(spec.lambda - 1.0) * spec.lambda))
    }
}

/// Largest transform value that can be inverted, if the image is bounded above.
pub fn image_upper_bound(spec: &TransformSpec) -> Option<f64> {
    if spec.is_log() || spec.lambda > 0.0 {
        None
    } else {
        Some(-1.0 / (spec.theta_hat.powf(spec.lambda - 1.0) * spec.lambda))
    }
}

/// Applies the transform to every level and differences the result
/// `spec.n_diffs` times.
pub fn ergodic_increments(x: &TimeSeries, spec: &TransformSpec) -> Result<DifferencedSeries> {
    let transformed = x
        .values
        .iter()
        .map(|&v| boxcox(v, spec))
        .collect::<Result<Vec<_>>>()?;
    difference(&transformed, spec.n_diffs)
}

/// Log-levels of a positive series with its log geometric mean, cached so that
/// the transform can be evaluated cheaply across many values of lambda.
#[derive(Debug, Clone)]
pub(crate) struct LogLevels {
    logs: Vec<f64>,
    log_theta: f64,
}

impl LogLevels {
    pub(crate) fn new(levels: &[f64]) -> Result<Self> {
        let log_theta = log_geometric_mean(levels)?;
        Ok(Self {
            logs: levels.iter().map(|v| v.ln()).collect(),
            log_theta,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.logs.len()
    }

    pub(crate) fn transformed(&self, lambda: f64) -> Vec<f64> {
        self.logs
            .iter()
            .map(|&l| boxcox_log(l, lambda, self.log_theta))
            .collect()
    }

    pub(crate) fn increments(&self, lambda: f64, n_diffs: usize) -> Result<Vec<f64>> {
        Ok(difference(&self.transformed(lambda), n_diffs)?.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(lambda: f64, theta: f64) -> TransformSpec {
        TransformSpec::new(lambda, 0, theta).unwrap()
    }

    #[test]
    fn boxcox_examples() {
        assert!((boxcox(2.0, &spec(1.0, 4.0)).unwrap() - 1.0).abs() < 1e-15);
        let log_branch = boxcox(2.0, &spec(0.0, 4.0)).unwrap();
        assert!((log_branch - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((log_branch - 2.772_588_722_239_781).abs() < 1e-12);
        let near_zero = boxcox(2.0, &spec(1e-9, 4.0)).unwrap();
        assert!((near_zero - log_branch).abs() < 1e-6);
        assert!(boxcox(0.0, &spec(0.5, 1.0)).is_err());
        assert!(boxcox(-1.0, &spec(0.5, 1.0)).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert!((boxcox_inverse(1.0, &spec(1.0, 4.0)).unwrap() - 2.0).abs() < 1e-14);
        assert!((boxcox_inverse(4.0 * 2f64.ln(), &spec(0.0, 4.0)).unwrap() - 2.0).abs() < 1e-14);
        // lambda = 1, theta = 4: image is y > -1
        assert!(boxcox_inverse(-1.5, &spec(1.0, 4.0)).is_err());
        assert_eq!(image_lower_bound(&spec(1.0, 4.0)), Some(-1.0));
    }

    #[test]
    fn continuity_at_zero() {
        for &lambda in &[1e-4, 1e-6, 1e-8] {
            for &theta in &[0.5, 1.0, 7.0] {
                for i in 1..=50 {
                    let x = 0.1 * i as f64;
                    let a = boxcox(x, &spec(lambda, theta)).unwrap();
                    let b = boxcox(x, &spec(0.0, theta)).unwrap();
                    let bound = 10.0 * lambda * theta * (1.0 + x.ln().powi(2));
                    assert!((a - b).abs() <= bound, "lambda {lambda} x {x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn increments_examples() {
        let x = TimeSeries::new(vec![0.1f64.exp(), 0.2f64.exp(), 0.3f64.exp()]);
        let s = TransformSpec::for_levels(&x.values, 0.0, 1).unwrap();
        let z = ergodic_increments(&x, &s).unwrap();
        assert_eq!(z.len(), 2);
        for v in &z.values {
            assert!((v - 0.1 * s.theta_hat).abs() < 1e-12);
        }

        let x = TimeSeries::new(vec![1.0, 2.0, 4.0]);
        let s = TransformSpec::for_levels(&x.values, 1.0, 1).unwrap();
        let z = ergodic_increments(&x, &s).unwrap();
        assert!((z.values[0] - 1.0).abs() < 1e-12);
        assert!((z.values[1] - 2.0).abs() < 1e-12);

        let bad = TimeSeries::new(vec![1.0, -2.0, 4.0]);
        assert!(ergodic_increments(&bad, &s).is_err());
    }

    #[test]
    fn cached_levels_match_direct_transform() {
        let levels = [0.5, 1.5, 2.25, 3.0, 0.8];
        let cache = LogLevels::new(&levels).unwrap();
        for &lambda in &[-0.5, 0.0, 0.3, 1.0, 1.4] {
            let s = TransformSpec::for_levels(&levels, lambda, 1).unwrap();
            let direct = ergodic_increments(&TimeSeries::new(levels.to_vec()), &s).unwrap();
            let cached = cache.increments(lambda, 1).unwrap();
            for (a, b) in direct.values.iter().zip(&cached) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn inverse_round_trip(
            x in 1e-3f64..1e3,
            lambda in -1.5f64..2.0,
            theta in 1e-2f64..1e2,
        ) {
            let s = spec(lambda, theta);
            let back = boxcox_inverse(boxcox(x, &s).unwrap(), &s).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x, "x {} back {}", x, back);
        }

        #[test]
        fn strictly_increasing(
            x in 1e-3f64..1e3,
            step in 1e-3f64..10.0,
            lambda in -2.0f64..2.0,
            theta in 1e-2f64..1e2,
        ) {
            let s = spec(lambda, theta);
            prop_assert!(boxcox(x + step, &s).unwrap() > boxcox(x, &s).unwrap());
        }
    }
}
