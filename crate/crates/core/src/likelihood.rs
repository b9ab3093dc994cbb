//! Profile log-likelihood of the transformation parameter and its maximizer.
//!
//! Three criteria are available:
//!
//! * [`LikelihoodMode::Iid`]: increments treated as i.i.d. Gaussian, so the
//!   profile reduces to `-(m / 2) * ln(var)` with `m` the number of increments.
//! * [`LikelihoodMode::General`]: increments treated as a stationary Gaussian
//!   vector with a tapered Toeplitz covariance and GLS mean.
//! * [`LikelihoodMode::BoxcoxLevels`]: the classical normalized Box-Cox
//!   criterion on the transformed levels, kept as a baseline.
//!
//! All profiles are defined up to a constant that does not depend on lambda.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocov::{gls_mean_factored, tapered_autocov_matrix_with, AutocovConfig};
use crate::error::{Error, Result};
use crate::series::{ml_variance, validate_series, TimeSeries, MIN_LEN};
use crate::special::chi2_quantile;
use crate::transform::LogLevels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    Iid,
    General,
    BoxcoxLevels,
}

impl std::fmt::Display for LikelihoodMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LikelihoodMode::Iid => "iid",
            LikelihoodMode::General => "general",
            LikelihoodMode::BoxcoxLevels => "boxcox_levels",
        })
    }
}

impl std::str::FromStr for LikelihoodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "iid" => Ok(LikelihoodMode::Iid),
            "general" => Ok(LikelihoodMode::General),
            "boxcox_levels" | "boxcox" => Ok(LikelihoodMode::BoxcoxLevels),
            other => Err(Error::InvalidParameter(format!(
                "unknown likelihood mode '{other}'"
            ))),
        }
    }
}

/// Search range, grid and interval settings for [`estimate_lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_points: usize,
    pub alpha: f64,
    /// Final bracket width of the golden-section refinement.
    pub golden_tol: f64,
    pub autocov: AutocovConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            lambda_min: 0.0,
            lambda_max: 1.0,
            grid_points: 101,
            alpha: 0.05,
            golden_tol: 1e-7,
            autocov: AutocovConfig::default(),
        }
    }
}

impl EstimateConfig {
    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.lambda_min = lo;
        self.lambda_max = hi;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_min < self.lambda_max)
            || !self.lambda_min.is_finite()
            || !self.lambda_max.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "lambda range [{}, {}] is empty",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidParameter(
                "grid needs at least 3 points".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.golden_tol > 0.0 && self.golden_tol < 1e-4) {
            return Err(Error::InvalidParameter(
                "golden_tol must lie in (0, 1e-4)".into(),
            ));
        }
        Ok(())
    }
}

/// Profile log-likelihood over a grid with the refined maximizer and interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileResult {
    pub mode: LikelihoodMode,
    pub n_diffs: usize,
    pub lambdas: Vec<f64>,
    /// NaN where the likelihood is degenerate.
    pub llf: Vec<f64>,
    pub grid_index: usize,
    pub lambda_hat: f64,
    pub llf_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    /// Second difference of the grid profile at the grid maximum, per unit lambda squared.
    pub curvature: Option<f64>,
    /// The maximizer sits on the edge of the search range.
    pub boundary: bool,
    /// The profile varies by less than 2 log-likelihood units across the grid.
    pub weak_identification: bool,
}

impl ProfileResult {
    pub fn covers(&self, lambda: f64) -> bool {
        self.ci_low <= lambda && lambda <= self.ci_high
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Likelihood-ratio threshold `chi2_1(1 - alpha) / 2`.
pub fn ci_threshold(alpha: f64) -> f64 {
    0.5 * chi2_quantile(1.0 - alpha, 1.0)
}

/// Profile log-likelihood of one series, evaluable at any lambda.
#[derive(Debug, Clone)]
pub struct Profile {
    levels: LogLevels,
    n_diffs: usize,
    mode: LikelihoodMode,
    autocov: AutocovConfig,
}

impl Profile {
    pub fn new(x: &TimeSeries, n_diffs: usize, mode: LikelihoodMode) -> Result<Self> {
        Self::with_autocov(x, n_diffs, mode, AutocovConfig::default())
    }

    pub fn with_autocov(
        x: &TimeSeries,
        n_diffs: usize,
        mode: LikelihoodMode,
        autocov: AutocovConfig,
    ) -> Result<Self> {
        validate_series(x, true).into_result()?;
        let n_diffs = if mode == LikelihoodMode::BoxcoxLevels {
            0
        } else {
            n_diffs
        };
        if x.len() < n_diffs + MIN_LEN {
            return Err(Error::TooShort {
                required: n_diffs + MIN_LEN,
                actual: x.len(),
            });
        }
        Ok(Self {
            levels: LogLevels::new(&x.values)?,
            n_diffs,
            mode,
            autocov,
        })
    }

    pub fn mode(&self) -> LikelihoodMode {
        self.mode
    }

    /// Number of observations entering the likelihood.
    pub fn count(&self) -> usize {
        self.levels.len() - self.n_diffs
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let z = self.levels.increments(lambda, self.n_diffs)?;
        let value = match self.mode {
            LikelihoodMode::Iid | LikelihoodMode::BoxcoxLevels => iid_profile(&z, lambda)?,
            LikelihoodMode::General => general_profile(&z, lambda, &self.autocov)?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::DegenerateLikelihood { lambda })
        }
    }

    /// Evaluation with degenerate points mapped to negative infinity.
    fn eval_or_neg_inf(&self, lambda: f64) -> f64 {
        self.eval(lambda).unwrap_or(f64::NEG_INFINITY)
    }
}

fn iid_profile(z: &[f64], lambda: f64) -> Result<f64> {
    let m = z.len() as f64;
    let var = ml_variance(z);
    let mean_abs = z.iter().map(|v| v.abs()).sum::<f64>() / m;
    if !(var > 1e-12 * mean_abs * mean_abs) || var < f64::MIN_POSITIVE {
        return Err(Error::DegenerateLikelihood { lambda });
    }
    Ok(-0.5 * m * var.ln())
}

fn general_profile(z: &[f64], lambda: f64, config: &AutocovConfig) -> Result<f64> {
    let sigma = tapered_autocov_matrix_with(z, config).map_err(|e| match e {
        Error::DegenerateVariance => Error::DegenerateLikelihood { lambda },
        other => other,
    })?;
    let factor = sigma.factorize()?;
    let mu = gls_mean_factored(z, &factor);
    let resid: Vec<f64> = z.iter().map(|v| v - mu).collect();
    Ok(-0.5 * (factor.log_det() + factor.quad_form(&resid)))
}

/// I.i.d. profile log-likelihood `-((T - n) / 2) ln var(increments)`.
pub fn llf_iid(x: &TimeSeries, lambda: f64, n_diffs: usize) -> Result<f64> {
    Profile::new(x, n_diffs, LikelihoodMode::Iid)?.eval(lambda)
}

/// Stationary-covariance profile log-likelihood
/// `-(ln det S + (z - mu 1)' S^{-1} (z - mu 1)) / 2` with tapered `S` and GLS `mu`.
pub fn llf_general(x: &TimeSeries, lambda: f64, n_diffs: usize) -> Result<f64> {
    Profile::new(x, n_diffs, LikelihoodMode::General)?.eval(lambda)
}

/// Same as [`llf_general`] with an explicit covariance configuration.
pub fn llf_general_with(
    x: &TimeSeries,
    lambda: f64,
    n_diffs: usize,
    autocov: AutocovConfig,
) -> Result<f64> {
    Profile::with_autocov(x, n_diffs, LikelihoodMode::General, autocov)?.eval(lambda)
}

/// Classical Box-Cox profile `-(T / 2) ln var(F(x; lambda))` on the levels.
pub fn boxcox_levels_llf(x: &TimeSeries, lambda: f64) -> Result<f64> {
    Profile::new(x, 0, LikelihoodMode::BoxcoxLevels)?.eval(lambda)
}

/// Grid search, golden-section refinement and likelihood-ratio interval.
pub fn estimate_lambda(
    x: &TimeSeries,
    n_diffs: usize,
    mode: LikelihoodMode,
    config: &EstimateConfig,
) -> Result<ProfileResult> {
    config.validate()?;
    let profile = Profile::with_autocov(x, n_diffs, mode, config.autocov)?;
    estimate_from_profile(&profile, config)
}

pub fn estimate_from_profile(profile: &Profile, config: &EstimateConfig) -> Result<ProfileResult> {
    config.validate()?;
    let (lo, hi) = (config.lambda_min, config.lambda_max);
    let n = config.grid_points;
    let step = (hi - lo) / (n - 1) as f64;
    let lambdas: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();

    let values: Vec<f64> = if profile.mode == LikelihoodMode::General {
        lambdas
            .par_iter()
            .map(|&l| profile.eval_or_neg_inf(l))
            .collect()
    } else {
        lambdas
            .iter()
            .map(|&l| profile.eval_or_neg_inf(l))
            .collect()
    };

    // Strict comparison keeps the smallest lambda among ties.
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b: usize| v > values[b]) {
            best = Some(i);
        }
    }
    let grid_index = best.ok_or_else(|| {
        Error::EstimationFailure("likelihood is degenerate at every grid point".into())
    })?;

    let bracket_lo = lambdas[grid_index.saturating_sub(1)];
    let bracket_hi = lambdas[(grid_index + 1).min(n - 1)];
    let (mut lambda_hat, mut llf_hat) = golden_section_max(
        |l| profile.eval_or_neg_inf(l),
        bracket_lo,
        bracket_hi,
        config.golden_tol,
    );
    if !(llf_hat >= values[grid_index]) {
        lambda_hat = lambdas[grid_index];
        llf_hat = values[grid_index];
    }
    let edge_tol = 2.0 * config.golden_tol;
    for (edge, v) in [(lo, values[0]), (hi, values[n - 1])] {
        if (lambda_hat - edge).abs() <= edge_tol && v >= llf_hat {
            lambda_hat = edge;
            llf_hat = v;
        }
    }

    let threshold = ci_threshold(config.alpha);
    let outside = |l: f64| llf_hat - profile.eval_or_neg_inf(l) >= threshold;

    // Walk outwards over the grid to bracket each crossing, then bisect.
    let below: Vec<usize> = (0..n).filter(|&i| lambdas[i] < lambda_hat).rev().collect();
    let above: Vec<usize> = (0..n).filter(|&i| lambdas[i] > lambda_hat).collect();
    let ci_low = interval_edge(&below, &lambdas, lambda_hat, lo, &outside);
    let ci_high = interval_edge(&above, &lambdas, lambda_hat, hi, &outside);

    let curvature = if n >= 3 {
        let i = grid_index.clamp(1, n - 2);
        let c = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (step * step);
        c.is_finite().then_some(c)
    } else {
        None
    };

    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - finite.iter().copied().fold(f64::INFINITY, f64::min);
    let boundary = (lambda_hat - lo).abs() <= edge_tol || (hi - lambda_hat).abs() <= edge_tol;

    Ok(ProfileResult {
        mode: profile.mode,
        n_diffs: profile.n_diffs,
        llf: values
            .iter()
            .map(|&v| if v.is_finite() { v } else { f64::NAN })
            .collect(),
        lambdas,
        grid_index,
        lambda_hat,
        llf_hat,
        ci_low,
        ci_high,
        alpha: config.alpha,
        curvature,
        boundary,
        weak_identification: spread < 2.0,
    })
}

fn interval_edge(
    order: &[usize],
    lambdas: &[f64],
    lambda_hat: f64,
    range_edge: f64,
    outside: &impl Fn(f64) -> bool,
) -> f64 {
    let mut inner = lambda_hat;
    for &i in order {
        let candidate = lambdas[i];
        if outside(candidate) {
            return bisect_crossing(outside, candidate, inner);
        }
        inner = candidate;
    }
    range_edge
}

/// Shrinks `[out, inside]` onto the boundary of the confidence set.
fn bisect_crossing(outside: &impl Fn(f64) -> bool, mut out: f64, mut inside: f64) -> f64 {
    for _ in 0..200 {
        if (out - inside).abs() < 1e-10 {
            break;
        }
        let mid = 0.5 * (out + inside);
        if outside(mid) {
            out = mid;
        } else {
            inside = mid;
        }
    }
    inside
}

/// Maximizes a unimodal function on `[a, b]` until the bracket is below `tol`.
/// On equal values the left sub-bracket is kept.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .fold(
            (mid, fm),
            |best, cand| if cand.1 > best.1 { cand } else { best },
        )
}
