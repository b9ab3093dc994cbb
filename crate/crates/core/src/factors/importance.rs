use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::Panel;

/// Length of the per-factor ranking.
pub const DEFAULT_TOP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSeries {
    pub id: String,
    pub group: Option<u8>,
    pub mr2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupImportance {
    /// `None` collects series without a known group.
    pub group: Option<u8>,
    pub count: usize,
    /// Average marginal R^2 of each factor over the group's series.
    pub mean_mr2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalR2 {
    pub ids: Vec<String>,
    pub groups: Vec<Option<u8>>,
    /// Series by factor; entry `(i, k)` is the R^2 of series `i` on factors `1..=k+1`.
    pub r2: DMatrix<f64>,
    /// Series by factor; successive differences of `r2` along each row.
    pub mr2: DMatrix<f64>,
    /// Average of each `mr2` column over all series.
    pub factor_mean: Vec<f64>,
    pub by_group: Vec<GroupImportance>,
    /// For each factor, the series with the largest marginal R^2.
    pub top: Vec<Vec<RankedSeries>>,
}

/// Orthonormal basis of the nested spans of `[1, F_1, ..., F_K]` by modified
/// Gram-Schmidt with one re-orthogonalization pass. A factor inside the span
/// of its predecessors contributes a zero column.
fn nested_basis(factors: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let t = factors.nrows();
    let mut basis = vec![DVector::from_element(t, 1.0 / (t as f64).sqrt())];
    for k in 0..factors.ncols() {
        let mut v = factors.column(k).into_owned();
        let scale = v.norm();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            basis.push(v / norm);
        } else {
            basis.push(DVector::zeros(t));
        }
    }
    basis
}

/// Nested R^2 of every series on the ordered factors and the marginal
/// contribution of each factor, with group averages and per-factor rankings.
pub fn marginal_r2(factors: &DMatrix<f64>, p: &Panel, top: usize) -> Result<MarginalR2> {
    if factors.nrows() != p.n_periods() {
        return Err(Error::InvalidParameter(format!(
            "factors have {} rows but the panel has {} periods",
            factors.nrows(),
            p.n_periods()
        )));
    }
    if let Some(index) = p.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let k = factors.ncols();
    let n = p.n_series();
    let basis = nested_basis(factors);

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = p.data.column(i);
            let mean = y.mean();
            let yc = y.map(|v| v - mean);
            let tss = yc.norm_squared();
            let mut acc = 0.0;
            (1..=k)
                .map(|j| {
                    if tss > 0.0 {
                        let c = basis[j].dot(&yc);
                        acc += c * c / tss;
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let r2 = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let mr2 = DMatrix::from_fn(n, k, |i, j| {
        if j == 0 {
            r2[(i, 0)]
        } else {
            r2[(i, j)] - r2[(i, j - 1)]
        }
    });
    let factor_mean: Vec<f64> = (0..k).map(|j| mr2.column(j).mean()).collect();

    let mut labels: Vec<Option<u8>> = p.groups.clone();
    labels.sort_by_key(|g| g.map_or(u16::MAX, u16::from));
    labels.dedup();
    let by_group = labels
        .into_iter()
        .map(|g| {
            let members: Vec<usize> = (0..n).filter(|&i| p.groups[i] == g).collect();
            GroupImportance {
                group: g,
                count: members.len(),
                mean_mr2: (0..k)
                    .map(|j| {
                        members.iter().map(|&i| mr2[(i, j)]).sum::<f64>() / members.len() as f64
                    })
                    .collect(),
            }
        })
        .collect();

    let top = (0..k)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            // Stable sort keeps panel order among ties.
            idx.sort_by(|&a, &b| mr2[(b, j)].total_cmp(&mr2[(a, j)]));
            idx.into_iter()
                .take(top)
                .map(|i| RankedSeries {
                    id: p.ids[i].clone(),
                    group: p.groups[i],
                    mr2: mr2[(i, j)],
                })
                .collect()
        })
        .collect();

    Ok(MarginalR2 {
        ids: p.ids.clone(),
        groups: p.groups.clone(),
        r2,
        mr2,
        factor_mean,
        by_group,
        top,
    })
}
