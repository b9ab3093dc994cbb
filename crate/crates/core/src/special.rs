//! Distribution functions used by the tests and interval construction.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, gamma_ur};

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_sf(x: f64) -> f64 {
    Normal::standard().sf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper-tail probability of a chi-square variable with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, x / 2.0)
    }
}

/// Quantile of the chi-square distribution, by inverting the regularized
/// lower incomplete gamma function with safeguarded Newton steps.
pub fn chi2_quantile(p: f64, df: f64) -> f64 {
    assert!(
        (0.0..1.0).contains(&p) && df > 0.0,
        "invalid chi-square quantile request"
    );
    if p == 0.0 {
        return 0.0;
    }
    let a = df / 2.0;
    // Bracket in terms of y = x / 2.
    let mut lo = 0.0;
    let mut hi = a.max(1.0);
    while gamma_lr(a, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let ln_gamma_a = statrs::function::gamma::ln_gamma(a);
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = gamma_lr(a, y) - p;
        if f.abs() < 1e-15 {
            break;
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let density = ((a - 1.0) * y.ln() - y - ln_gamma_a).exp();
        let newton = y - f / density;
        y = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    2.0 * y
}
