//! Principal-components factors of a standardized panel and the marginal
//! explanatory power of each factor for each series.

mod extract;
mod importance;
mod impute;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::TCode;
use crate::policy::SeriesTransform;

pub use extract::{canonical_correlations, extract_factors, FactorResult};
pub use importance::{marginal_r2, GroupImportance, MarginalR2, RankedSeries, DEFAULT_TOP};
pub use impute::{impute_missing, Imputation, ImputeConfig};

/// Minimum number of observed entries for a column to be standardized.
pub const MIN_OBSERVED: usize = 10;

/// A time-by-series matrix with a missing-value mask and per-series metadata.
///
/// Missing entries hold `NaN` in `data` and `false` in `observed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub data: DMatrix<f64>,
    pub observed: DMatrix<bool>,
    pub ids: Vec<String>,
    pub groups: Vec<Option<u8>>,
    pub tcodes: Vec<Option<TCode>>,
    pub transforms: Vec<Option<SeriesTransform>>,
    pub dates: Vec<String>,
}

impl Panel {
    /// Builds a panel treating non-finite entries as missing.
    pub fn new(data: DMatrix<f64>, ids: Vec<String>) -> Result<Self> {
        if ids.len() != data.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{} ids for {} columns",
                ids.len(),
                data.ncols()
            )));
        }
        let observed = data.map(f64::is_finite);
        let data = data.map(|v| if v.is_finite() { v } else { f64::NAN });
        let n = ids.len();
        let t = data.nrows();
        Ok(Self {
            data,
            observed,
            ids,
            groups: vec![None; n],
            tcodes: vec![None; n],
            transforms: vec![None; n],
            dates: (0..t).map(|i| i.to_string()).collect(),
        })
    }

    pub fn with_groups(mut self, groups: Vec<Option<u8>>) -> Self {
        assert_eq!(groups.len(), self.n_series());
        self.groups = groups;
        self
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Self {
        assert_eq!(dates.len(), self.n_periods());
        self.dates = dates;
        self
    }

    pub fn n_periods(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    pub fn missing_count(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    /// Column `j` with `None` at missing entries.
    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        (0..self.n_periods())
            .map(|t| self.observed[(t, j)].then(|| self.data[(t, j)]))
            .collect()
    }

    pub fn observed_values(&self, j: usize) -> Vec<f64> {
        self.column(j).into_iter().flatten().collect()
    }

    pub fn missing_fraction(&self, j: usize) -> f64 {
        let missing = (0..self.n_periods())
            .filter(|&t| !self.observed[(t, j)])
            .count();
        missing as f64 / self.n_periods().max(1) as f64
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(cols),
            observed: self.observed.select_columns(cols),
            ids: cols.iter().map(|&j| self.ids[j].clone()).collect(),
            groups: cols.iter().map(|&j| self.groups[j]).collect(),
            tcodes: cols.iter().map(|&j| self.tcodes[j]).collect(),
            transforms: cols.iter().map(|&j| self.transforms[j]).collect(),
            dates: self.dates.clone(),
        }
    }

    /// Keeps rows `start..`.
    pub fn drop_leading_rows(&self, start: usize) -> Self {
        let start = start.min(self.n_periods());
        let rows = self.n_periods() - start;
        Self {
            data: self.data.rows(start, rows).into_owned(),
            observed: self.observed.rows(start, rows).into_owned(),
            dates: self.dates[start..].to_vec(),
            ..self.clone()
        }
    }

    /// Replaces column `j` with the given values, `None` marking missing.
    pub fn set_column(&mut self, j: usize, values: &[Option<f64>]) {
        assert_eq!(values.len(), self.n_periods());
        for (t, v) in values.iter().enumerate() {
            self.observed[(t, j)] = v.is_some();
            self.data[(t, j)] = v.unwrap_or(f64::NAN);
        }
    }
}

/// Why a column was dropped before factor extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    TooFewObservations { observed: usize },
    DegenerateVariance,
    TooManyMissing { fraction: f64 },
    Transform { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub id: String,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub panel: Panel,
    pub excluded: Vec<Exclusion>,
    /// Column means and standard deviations of the retained columns.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Mean and sample standard deviation (divisor `n - 1`) of the observed entries.
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Z-scores each column over its observed entries; degenerate columns are
/// dropped and reported.
pub fn standardize_panel(p: &Panel) -> Standardized {
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    let mut stats = Vec::new();
    for j in 0..p.n_series() {
        let obs = p.observed_values(j);
        if obs.len() < MIN_OBSERVED {
            excluded.push(Exclusion {
                id: p.ids[j].clone(),
                reason: ExclusionReason::TooFewObservations {
                    observed: obs.len(),
                },
            });
            continue;
        }
        let (mean, sd) = moments(&obs);
        if !(sd > 0.0) || !sd.is_finite() || sd <= 1e-12 * mean.abs() {
            excluded.push(Exclusion {
                id: p.ids[j].clone(),
                reason: ExclusionReason::DegenerateVariance,
            });
            continue;
        }
        keep.push(j);
        stats.push((mean, sd));
    }
    let mut panel = p.select_columns(&keep);
    for (c, &(mean, sd)) in stats.iter().enumerate() {
        for t in 0..panel.n_periods() {
            if panel.observed[(t, c)] {
                panel.data[(t, c)] = (panel.data[(t, c)] - mean) / sd;
            }
        }
    }
    Standardized {
        panel,
        excluded,
        means: stats.iter().map(|s| s.0).collect(),
        sds: stats.iter().map(|s| s.1).collect(),
    }
}

/// Drops columns whose missing fraction is at least `max_fraction`.
pub fn drop_sparse_columns(p: &Panel, max_fraction: f64) -> (Panel, Vec<Exclusion>) {
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for j in 0..p.n_series() {
        let fraction = p.missing_fraction(j);
        if fraction >= max_fraction {
            excluded.push(Exclusion {
                id: p.ids[j].clone(),
                reason: ExclusionReason::TooManyMissing { fraction },
            });
        } else {
            keep.push(j);
        }
    }
    (p.select_columns(&keep), excluded)
}
