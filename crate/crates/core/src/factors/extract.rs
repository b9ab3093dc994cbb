use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::Panel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorResult {
    /// Time by k; column `j` is `s_j u_j`.
    pub factors: DMatrix<f64>,
    /// Series by k; orthonormal columns.
    pub loadings: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `s_j^2 / T`, decreasing.
    pub eigenvalues: Vec<f64>,
    /// Share of total variation carried by each retained factor.
    pub explained: Vec<f64>,
    pub explained_total: f64,
    pub k_requested: usize,
    /// Fewer than `k_requested` non-negligible singular values were found.
    pub rank_deficient: bool,
}

impl FactorResult {
    pub fn k(&self) -> usize {
        self.factors.ncols()
    }
}

/// Principal components of a complete panel via the singular value decomposition.
///
/// Signs are fixed so that every loading vector has a non-negative sum.
pub fn extract_factors(p: &Panel, k: usize) -> Result<FactorResult> {
    let (t, n) = (p.n_periods(), p.n_series());
    if k == 0 || k > t.min(n) {
        return Err(Error::InvalidParameter(format!(
            "factor count {k} must lie in 1..={}",
            t.min(n)
        )));
    }
    if let Some(pos) = p.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: pos });
    }

    let svd = p.data.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let s_max = s.first().copied().unwrap_or(0.0);
    let cutoff = s_max * t.max(n) as f64 * f64::EPSILON;
    let rank = s.iter().filter(|&&v| v > cutoff).count();
    let k_used = k.min(rank);
    if k_used == 0 {
        return Err(Error::DegenerateVariance);
    }

    let mut factors = DMatrix::zeros(t, k_used);
    let mut loadings = DMatrix::zeros(n, k_used);
    for (c, &i) in order.iter().take(k_used).enumerate() {
        let mut f = u.column(i) * svd.singular_values[i];
        let mut l = v_t.row(i).transpose();
        if l.sum() < 0.0 {
            f.neg_mut();
            l.neg_mut();
        }
        factors.set_column(c, &f);
        loadings.set_column(c, &l);
    }

    let total: f64 = s.iter().map(|v| v * v).sum();
    let explained: Vec<f64> = s.iter().take(k_used).map(|v| v * v / total).collect();
    Ok(FactorResult {
        factors,
        loadings,
        eigenvalues: s.iter().map(|v| v * v / t as f64).collect(),
        explained_total: explained.iter().sum(),
        explained,
        singular_values: s,
        k_requested: k,
        rank_deficient: k_used < k,
    })
}

/// Cosines of the principal angles between the column spaces of `a` and `b`,
/// in decreasing order.
pub fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let mut s: Vec<f64> = (qa.transpose() * qb)
        .singular_values()
        .iter()
        .map(|v| v.min(1.0))
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}
