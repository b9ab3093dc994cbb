//! Stability of the estimated exponent across contiguous sub-samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{estimate_lambda, EstimateConfig, LikelihoodMode};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of non-overlapping blocks the window length is derived from.
    pub blocks: usize,
    /// Minimum number of levels in every window.
    pub min_window: usize,
    /// Draw window starts at random instead of on the regular half-window grid.
    pub randomize: bool,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            blocks: 5,
            min_window: 30,
            randomize: false,
            seed: 0,
        }
    }
}

/// Half-open `(start, end)` ranges of the windows over `len` levels.
///
/// Windows hold `len / blocks` levels and advance by half a window, giving
/// `2 * blocks - 1` windows that overlap their neighbours by 50%.
pub fn bootstrap_windows(len: usize, config: &BootstrapConfig) -> Result<Vec<(usize, usize)>> {
    if config.blocks < 2 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 2 blocks, got {}",
            config.blocks
        )));
    }
    let window = len / config.blocks;
    if window < config.min_window {
        return Err(Error::WindowsTooShort {
            window,
            required: config.min_window,
        });
    }
    let count = 2 * config.blocks - 1;
    let mut starts: Vec<usize> = if config.randomize {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        (0..count)
            .map(|_| rng.random_range(0..=len - window))
            .collect()
    } else {
        let step = window / 2;
        (0..count).map(|i| (i * step).min(len - window)).collect()
    };
    starts.sort_unstable();
    Ok(starts.into_iter().map(|s| (s, s + window)).collect())
}

/// Re-estimates the exponent on each window, in window order.
pub fn bootstrap_lambda(
    x: &TimeSeries,
    n_diffs: usize,
    mode: LikelihoodMode,
    config: &BootstrapConfig,
    estimate: &EstimateConfig,
) -> Result<Vec<f64>> {
    let windows = bootstrap_windows(x.len(), config)?;
    windows
        .par_iter()
        .map(|&(s, e)| {
            let sub = TimeSeries::new(x.values[s..e].to_vec());
            estimate_lambda(&sub, n_diffs, mode, estimate).map(|r| r.lambda_hat)
        })
        .collect()
}
