//! Brownian-motion path simulation and the Monte Carlo recovery study.
//!
//! Paths are generated with ChaCha8 seeded from an explicit 64-bit seed; in a
//! study the path with index `i` uses `seed + i`, so results do not depend on
//! how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{estimate_lambda, EstimateConfig, LikelihoodMode};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    Gbm,
    Abm,
}

impl Process {
    /// Transformation parameter that makes the increments i.i.d. Gaussian.
    pub fn true_lambda(self) -> f64 {
        match self {
            Process::Gbm => 0.0,
            Process::Abm => 1.0,
        }
    }
}

impl std::fmt::Display for Process {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Process::Gbm => "gbm",
            Process::Abm => "abm",
        })
    }
}

impl std::str::FromStr for Process {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbm" => Ok(Process::Gbm),
            "abm" => Ok(Process::Abm),
            other => Err(Error::InvalidParameter(format!(
                "unknown process '{other}'"
            ))),
        }
    }
}

/// Per-year drift and volatility on a grid of `steps` points spaced `dt` years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub x0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for ProcessParams {
    fn default() -> Self {
        Self {
            x0: 1.0,
            mu: 0.05,
            sigma: 0.2,
            dt: 1.0 / 252.0,
            steps: 756,
        }
    }
}

impl ProcessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0) || !(self.sigma >= 0.0) || !(self.dt > 0.0) || self.steps < 1 {
            return Err(Error::InvalidParameter(format!(
                "invalid process parameters: x0 = {}, sigma = {}, dt = {}, steps = {}",
                self.x0, self.sigma, self.dt, self.steps
            )));
        }
        if !self.mu.is_finite() || !self.x0.is_finite() || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(
                "process parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Brownian motion sampled at `dt, 2 dt, ..., steps * dt`.
fn wiener_path(p: &ProcessParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = p.dt.sqrt();
    let mut w = 0.0;
    (0..p.steps)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            w += scale * e;
            w
        })
        .collect()
}

/// `X_t = X0 exp((mu - sigma^2 / 2) t + sigma W_t)`.
pub fn simulate_gbm(p: &ProcessParams, seed: u64) -> Result<TimeSeries> {
    p.validate()?;
    let drift = p.mu - 0.5 * p.sigma * p.sigma;
    let values = wiener_path(p, seed)
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let t = (k + 1) as f64 * p.dt;
            p.x0 * (drift * t + p.sigma * w).exp()
        })
        .collect();
    Ok(TimeSeries::new(values).with_period(p.dt))
}

/// Arithmetic path with a flag for non-positive values.
#[derive(Debug, Clone, PartialEq)]
pub struct AbmPath {
    pub series: TimeSeries,
    pub non_positive: bool,
}

/// `X_t = X0 + mu t + sigma W_t`.
pub fn simulate_abm(p: &ProcessParams, seed: u64) -> Result<AbmPath> {
    p.validate()?;
    let values: Vec<f64> = wiener_path(p, seed)
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            let t = (k + 1) as f64 * p.dt;
            p.x0 + p.mu * t + p.sigma * w
        })
        .collect();
    let non_positive = values.iter().any(|&v| v <= 0.0);
    Ok(AbmPath {
        series: TimeSeries::new(values).with_period(p.dt),
        non_positive,
    })
}

/// Settings of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub process: Process,
    pub sample_sizes: Vec<usize>,
    pub x0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
    pub reps: usize,
    pub mode: LikelihoodMode,
    pub seed: u64,
    pub estimate: EstimateConfig,
    /// Largest tolerated share of redrawn ABM paths.
    pub max_redraw_rate: f64,
}

impl StudyConfig {
    pub fn new(process: Process, sample_sizes: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self {
            process,
            sample_sizes,
            x0: 1.0,
            mu: 0.05,
            sigma: 0.2,
            dt: 1.0 / 252.0,
            reps,
            mode: LikelihoodMode::Iid,
            seed,
            estimate: EstimateConfig::default().with_range(-0.5, 1.5),
            max_redraw_rate: 0.2,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }
}

/// One row of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub process: Process,
    #[serde(rename = "T")]
    pub t: usize,
    pub x0: f64,
    pub reps: usize,
    pub bias: f64,
    pub sd: f64,
    pub coverage: f64,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub seed: u64,
    pub rows: Vec<StudyRow>,
    /// Estimates per sample size, in path order.
    #[serde(skip)]
    pub lambdas: Vec<Vec<f64>>,
}

/// Minimum replications per sample size.
pub const MIN_REPS: usize = 50;

/// Simulates `reps` paths for each sample size and summarizes the sampling
/// distribution of the estimated transformation parameter.
pub fn run_recovery_study(config: &StudyConfig) -> Result<StudyResult> {
    if config.reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!(
            "recovery study needs at least {MIN_REPS} replications, got {}",
            config.reps
        )));
    }
    if config.sample_sizes.is_empty() {
        return Err(Error::InvalidParameter("no sample sizes requested".into()));
    }
    let truth = config.process.true_lambda();
    let mut rows = Vec::with_capacity(config.sample_sizes.len());
    let mut all = Vec::with_capacity(config.sample_sizes.len());
    for &t in &config.sample_sizes {
        let params = ProcessParams {
            x0: config.x0,
            mu: config.mu,
            sigma: config.sigma,
            dt: config.dt,
            steps: t,
        };
        params.validate()?;
        let outcomes = (0..config.reps)
            .into_par_iter()
            .map(|i| replicate(config, &params, i as u64))
            .collect::<Result<Vec<_>>>()?;

        let redraws: usize = outcomes.iter().map(|o| o.redraws).sum();
        if redraws as f64 > config.max_redraw_rate * config.reps as f64 {
            return Err(Error::InvalidParameter(format!(
                "{redraws} of {} paths had non-positive values at T = {t}; \
                 the parameterization is unsuitable for positive transforms",
                config.reps
            )));
        }
        let lambdas: Vec<f64> = outcomes.iter().map(|o| o.lambda_hat).collect();
        let n = lambdas.len() as f64;
        let mean = lambdas.iter().sum::<f64>() / n;
        let sd = (lambdas.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let coverage = outcomes.iter().filter(|o| o.covered).count() as f64 / n;
        rows.push(StudyRow {
            process: config.process,
            t,
            x0: config.x0,
            reps: config.reps,
            bias: mean - truth,
            sd,
            coverage,
            redraws,
        });
        all.push(lambdas);
    }
    Ok(StudyResult {
        seed: config.seed,
        rows,
        lambdas: all,
    })
}

struct Replicate {
    lambda_hat: f64,
    covered: bool,
    redraws: usize,
}

/// Path `i` is drawn with `seed + i`; an ABM redraw moves to
/// `seed + i + k * reps`, which never collides with another path's seeds.
fn replicate(config: &StudyConfig, params: &ProcessParams, index: u64) -> Result<Replicate> {
    const MAX_ATTEMPTS: u64 = 100;
    let reps = config.reps as u64;
    let mut redraws = 0;
    let series = loop {
        let seed = config
            .seed
            .wrapping_add(index)
            .wrapping_add(redraws as u64 * reps);
        match config.process {
            Process::Gbm => break simulate_gbm(params, seed)?,
            Process::Abm => {
                let path = simulate_abm(params, seed)?;
                if !path.non_positive {
                    break path.series;
                }
                redraws += 1;
                if redraws as u64 >= MAX_ATTEMPTS {
                    return Err(Error::InvalidParameter(format!(
                        "path {index} stayed non-positive after {MAX_ATTEMPTS} draws"
                    )));
                }
            }
        }
    };
    let fit = estimate_lambda(&series, 1, config.mode, &config.estimate)?;
    Ok(Replicate {
        lambda_hat: fit.lambda_hat,
        covered: fit.covers(config.process.true_lambda()),
        redraws,
    })
}
