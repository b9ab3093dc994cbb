//! Shapiro-Wilk normality test with Royston's (1995) approximations for the
//! coefficients and the null distribution of W.

use crate::error::{Error, Result};
use crate::special::{normal_quantile, normal_sf};

use super::TestResult;

const SMALL: f64 = 1e-19;

const G: [f64; 2] = [-2.273, 0.459];
const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Antisymmetric half of the Shapiro-Wilk coefficient vector, `a_1..a_{n/2}`.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half)
        .map(|i| normal_quantile((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// W statistic and p-value; requires `3 <= n <= 5000`.
pub fn shapiro_wilk(z: &[f64]) -> Result<TestResult> {
    let n = z.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "Shapiro-Wilk needs between 3 and 5000 observations, got {n}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "Shapiro-Wilk input contains non-finite values".into(),
        ));
    }
    let mut x = z.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let range = x[n - 1] - x[0];
    if range < SMALL {
        return Err(Error::DegenerateVariance);
    }
    // Scaling by the range keeps the sums well conditioned.
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ssq: f64 = xs.iter().map(|v| (v - mean) * (v - mean)).sum();
    let a = coefficients(n);
    let num: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (xs[n - 1 - i] - xs[i]))
        .sum();
    let w = (num * num / ssq).min(1.0);

    Ok(TestResult {
        statistic: w,
        p_value: p_value(w, n),
    })
}

fn p_value(w: f64, n: usize) -> f64 {
    if n == 3 {
        use std::f64::consts::{FRAC_PI_3, PI};
        return (6.0 / PI * (w.sqrt().asin() - FRAC_PI_3)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let mut y = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    normal_sf((y - m) / s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent implementation (scipy.stats.shapiro).
    #[test]
    fn matches_reference_values() {
        let r = shapiro_wilk(&(1..=10).map(f64::from).collect::<Vec<_>>()).unwrap();
        assert!((r.statistic - 0.970_164_611_085_605_6).abs() < 1e-6);
        assert!((r.p_value - 0.892_367_306_190_297_8).abs() < 1e-5);

        let r = shapiro_wilk(&[1.0, 2.0, 4.0]).unwrap();
        assert!((r.statistic - 0.964_285_714_285_714_2).abs() < 1e-9);
        assert!((r.p_value - 0.636_886_845_028_968_9).abs() < 1e-6);

        let sample = [
            2.1, 3.5, 1.2, 7.7, 4.4, 5.0, 6.1, 2.2, 9.0, 3.3, 4.8, 5.5, 1.1, 0.7, 8.8,
        ];
        let r = shapiro_wilk(&sample).unwrap();
        assert!((r.statistic - 0.941_342_933_393_413_2).abs() < 1e-6);
        assert!((r.p_value - 0.399_557_790_556_489_7).abs() < 1e-5);
    }

    #[test]
    fn small_samples() {
        let r = shapiro_wilk(&[0.3, 1.9, 2.0, 7.5]).unwrap();
        assert!(r.statistic > 0.0 && r.statistic <= 1.0);
        assert!((0.0..=1.0).contains(&r.p_value));
        let r = shapiro_wilk(&[0.3, 1.9, 2.0, 7.5, 2.2]).unwrap();
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            shapiro_wilk(&[2.0; 10]),
            Err(Error::DegenerateVariance)
        ));
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(shapiro_wilk(&vec![1.0; 5001]).is_err());
    }
}
