//! Series-level transformations used by the panel and forecasting stages, and
//! the three policies that choose them.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factors::{Exclusion, ExclusionReason, Panel};
use crate::ingest::TCode;
use crate::likelihood::{estimate_lambda, EstimateConfig, LikelihoodMode};
use crate::series::TimeSeries;
use crate::transform::{
    boxcox, boxcox_inverse, image_lower_bound, image_upper_bound, TransformSpec,
};

/// A level transform followed by differencing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesTransform {
    /// Raw levels, differenced `n_diffs` times.
    Levels { n_diffs: usize },
    /// Normalized Box-Cox, differenced `spec.n_diffs` times.
    Power { spec: TransformSpec },
    /// First difference of period-over-period fractional changes.
    PctChangeDiff,
}

/// One-step level forecast together with a flag set when the transformed
/// forecast fell outside the invertible range and was moved onto its edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelForecast {
    pub value: f64,
    pub clipped: bool,
}

impl SeriesTransform {
    /// Number of differences applied after the level stage.
    pub fn n_diffs(&self) -> usize {
        match self {
            Self::Levels { n_diffs } => *n_diffs,
            Self::Power { spec } => spec.n_diffs,
            Self::PctChangeDiff => 1,
        }
    }

    /// Leading observations consumed before the first output value.
    pub fn lead(&self) -> usize {
        match self {
            Self::PctChangeDiff => 2,
            _ => self.n_diffs(),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Self::Levels { .. } => Some(1.0),
            Self::Power { spec } => Some(spec.lambda),
            Self::PctChangeDiff => None,
        }
    }

    fn base(&self, x: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
        match self {
            Self::Levels { .. } => Ok(x.to_vec()),
            Self::Power { spec } => x
                .iter()
                .map(|v| v.map(|v| boxcox(v, spec)).transpose())
                .collect(),
            Self::PctChangeDiff => {
                let mut out = vec![None; x.len()];
                for t in 1..x.len() {
                    if let (Some(prev), Some(cur)) = (x[t - 1], x[t]) {
                        if prev == 0.0 {
                            return Err(Error::Domain(format!(
                                "percent change from a zero level at index {}",
                                t - 1
                            )));
                        }
                        out[t] = Some(cur / prev - 1.0);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Transformed increments aligned with the input: entry `t` is `None` when
    /// any level it depends on is missing or lies before the start.
    pub fn apply_aligned(&self, x: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
        let mut v = self.base(x)?;
        for _ in 0..self.n_diffs() {
            let mut next = vec![None; v.len()];
            for t in 1..v.len() {
                if let (Some(a), Some(b)) = (v[t - 1], v[t]) {
                    next[t] = Some(b - a);
                }
            }
            v = next;
        }
        Ok(v)
    }

    /// Transformed increments of a fully observed series, without padding.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() <= self.lead() {
            return Err(Error::DegenerateLength {
                order: self.lead(),
                len: x.len(),
            });
        }
        let wrapped: Vec<Option<f64>> = x.iter().map(|&v| Some(v)).collect();
        Ok(self.apply_aligned(&wrapped)?[self.lead()..]
            .iter()
            .map(|v| v.expect("fully observed input"))
            .collect())
    }

    /// Maps a forecast of the next increment back to a level, given the
    /// observed history.
    pub fn integrate(&self, history: &[f64], increment: f64) -> Result<LevelForecast> {
        let n = self.n_diffs();
        if history.len() <= self.lead() {
            return Err(Error::DegenerateLength {
                order: self.lead(),
                len: history.len(),
            });
        }
        let tail = &history[history.len() - self.lead() - 1..];
        let wrapped: Vec<Option<f64>> = tail.iter().map(|&v| Some(v)).collect();
        let base: Vec<f64> = self
            .base(&wrapped)?
            .into_iter()
            .skip(self.lead() - n)
            .map(|v| v.expect("fully observed history"))
            .collect();

        // Last value of each difference order 0..n-1, then add back down.
        let mut last = Vec::with_capacity(n);
        let mut cur = base;
        for _ in 0..n {
            last.push(*cur.last().expect("non-empty"));
            cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let next_base = last.iter().rev().fold(increment, |acc, l| acc + l);
        self.invert_base(next_base, history[history.len() - 1])
    }

    fn invert_base(&self, b: f64, last_level: f64) -> Result<LevelForecast> {
        match self {
            Self::Levels { .. } => Ok(LevelForecast {
                value: b,
                clipped: false,
            }),
            Self::PctChangeDiff => Ok(LevelForecast {
                value: last_level * (1.0 + b),
                clipped: false,
            }),
            Self::Power { spec } => {
                let lo = image_lower_bound(spec);
                let hi = image_upper_bound(spec);
                let mut y = b;
                let mut clipped = false;
                if let Some(lo) = lo.filter(|&lo| y <= lo) {
                    y = lo + CLIP_MARGIN * lo.abs().max(1.0);
                    clipped = true;
                }
                if let Some(hi) = hi.filter(|&hi| y >= hi) {
                    y = hi - CLIP_MARGIN * hi.abs().max(1.0);
                    clipped = true;
                }
                let value = boxcox_inverse(y, spec)?;
                Ok(LevelForecast { value, clipped })
            }
        }
    }
}

/// Relative distance from the image edge used when a forecast is clipped.
const CLIP_MARGIN: f64 = 1e-8;

/// How each series' transformation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// The database's own transformation code.
    Benchmark,
    /// Classical Box-Cox exponent of the levels, then the coded differencing.
    Boxcox,
    /// Exponent maximizing the likelihood of the differenced increments.
    Ergodicity,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Benchmark, Policy::Boxcox, Policy::Ergodicity];
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Benchmark => "benchmark",
            Policy::Boxcox => "boxcox",
            Policy::Ergodicity => "ergodicity",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(Policy::Benchmark),
            "boxcox" => Ok(Policy::Boxcox),
            "ergodicity" => Ok(Policy::Ergodicity),
            other => Err(Error::InvalidParameter(format!(
                "unknown policy '{other}' (expected benchmark, boxcox or ergodicity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyChoice {
    pub transform: SeriesTransform,
    /// Estimated exponent, when the policy estimates one.
    pub lambda_hat: Option<f64>,
    /// The series was not strictly positive and raw levels were used instead.
    pub fallback: bool,
}

/// Settings shared by the estimating policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub mode: LikelihoodMode,
    pub estimate: EstimateConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: LikelihoodMode::Iid,
            estimate: EstimateConfig::default(),
        }
    }
}

/// Picks the transformation of a fully observed level series.
pub fn choose_transform(
    levels: &[f64],
    tcode: TCode,
    policy: Policy,
    config: &PolicyConfig,
) -> Result<PolicyChoice> {
    let positive = levels.iter().all(|&v| v > 0.0 && v.is_finite());
    let n = tcode.total_diffs();
    let fallback = PolicyChoice {
        transform: SeriesTransform::Levels { n_diffs: n },
        lambda_hat: None,
        fallback: true,
    };
    if policy == Policy::Benchmark {
        let transform = tcode.benchmark_transform();
        if !positive && !matches!(transform, SeriesTransform::Levels { .. }) {
            return Ok(fallback);
        }
        return Ok(PolicyChoice {
            transform,
            lambda_hat: None,
            fallback: false,
        });
    }
    if !positive {
        return Ok(fallback);
    }
    let x = TimeSeries::new(levels.to_vec());
    let lambda = match policy {
        Policy::Boxcox => {
            estimate_lambda(&x, 0, LikelihoodMode::BoxcoxLevels, &config.estimate)?.lambda_hat
        }
        _ => estimate_lambda(&x, n, config.mode, &config.estimate)?.lambda_hat,
    };
    Ok(PolicyChoice {
        transform: SeriesTransform::Power {
            spec: TransformSpec::for_levels(levels, lambda, n)?,
        },
        lambda_hat: Some(lambda),
        fallback: false,
    })
}

/// Longest run of consecutive observed values.
pub fn longest_observed_run(x: &[Option<f64>]) -> Vec<f64> {
    let (mut best, mut start) = ((0, 0), 0);
    for t in 0..=x.len() {
        if t == x.len() || x[t].is_none() {
            if t - start > best.1 - best.0 {
                best = (start, t);
            }
            start = t + 1;
        }
    }
    x[best.0..best.1]
        .iter()
        .map(|v| v.expect("observed"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesChoice {
    pub id: String,
    pub group: Option<u8>,
    pub tcode: Option<TCode>,
    pub choice: PolicyChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPanel {
    /// Transformed increments, with the leading rows lost to differencing removed.
    pub panel: Panel,
    pub choices: Vec<SeriesChoice>,
    pub excluded: Vec<Exclusion>,
}

/// Applies a policy to every column of a panel of raw levels. Exponents are
/// estimated on each column's longest fully observed stretch; columns without
/// a code are treated as stationary levels.
pub fn transform_panel(raw: &Panel, policy: Policy, config: &PolicyConfig) -> TransformedPanel {
    let default_code = TCode::new(1).expect("valid code");
    let results: Vec<Result<(PolicyChoice, Vec<Option<f64>>)>> = (0..raw.n_series())
        .into_par_iter()
        .map(|j| {
            let column = raw.column(j);
            let run = longest_observed_run(&column);
            let tcode = raw.tcodes[j].unwrap_or(default_code);
            let mut choice = choose_transform(&run, tcode, policy, config)?;
            let observed: Vec<f64> = column.iter().flatten().copied().collect();
            let positive = observed.iter().all(|&v| v > 0.0);
            if !positive && !matches!(choice.transform, SeriesTransform::Levels { .. }) {
                choice.transform = SeriesTransform::Levels {
                    n_diffs: tcode.total_diffs(),
                };
                choice.lambda_hat = None;
                choice.fallback = true;
            }
            let values = choice.transform.apply_aligned(&column)?;
            Ok((choice, values))
        })
        .collect();

    let mut panel = raw.clone();
    let mut keep = Vec::new();
    let mut choices = Vec::new();
    let mut excluded = Vec::new();
    let mut lead = 0;
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok((choice, values)) => {
                panel.set_column(j, &values);
                panel.transforms[j] = Some(choice.transform);
                lead = lead.max(choice.transform.lead());
                keep.push(j);
                choices.push(SeriesChoice {
                    id: raw.ids[j].clone(),
                    group: raw.groups[j],
                    tcode: raw.tcodes[j],
                    choice,
                });
            }
            Err(e) => excluded.push(Exclusion {
                id: raw.ids[j].clone(),
                reason: ExclusionReason::Transform {
                    message: e.to_string(),
                },
            }),
        }
    }
    TransformedPanel {
        panel: panel.select_columns(&keep).drop_leading_rows(lead),
        choices,
        excluded,
    }
}
