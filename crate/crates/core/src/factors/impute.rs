use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImputeConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        Self {
            k: 3,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    /// Filled panel; `observed` still marks which entries were imputed.
    pub panel: Panel,
    pub iterations: usize,
    pub converged: bool,
    /// Largest change of an imputed entry in the final iteration.
    pub max_change: f64,
}

/// Best rank-`k` approximation from the leading singular triplets.
pub(crate) fn low_rank(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for &i in order.iter().take(k) {
        out += svd.singular_values[i] * u.column(i) * v_t.row(i);
    }
    out
}

/// Iterative principal-components imputation. Missing entries start at their
/// column means and are replaced by the rank-`k` reconstruction until they
/// move by less than `tol`. Observed entries are never modified.
pub fn impute_missing(p: &Panel, config: &ImputeConfig) -> Result<Imputation> {
    let (t, n) = (p.n_periods(), p.n_series());
    if config.k == 0 || config.k > t.min(n) {
        return Err(Error::InvalidParameter(format!(
            "imputation rank {} must lie in 1..={}",
            config.k,
            t.min(n)
        )));
    }
    for j in 0..n {
        let fraction = p.missing_fraction(j);
        if fraction >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "series {} is {:.0}% missing; imputation needs less than half",
                p.ids[j],
                100.0 * fraction
            )));
        }
    }

    let mut x = p.data.clone();
    let missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..t).map(move |i| (i, j)))
        .filter(|&(i, j)| !p.observed[(i, j)])
        .collect();
    for j in 0..n {
        let obs = p.observed_values(j);
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        for i in 0..t {
            if !p.observed[(i, j)] {
                x[(i, j)] = mean;
            }
        }
    }

    let mut iterations = 0;
    let mut max_change = 0.0;
    let mut converged = missing.is_empty();
    while !converged && iterations < config.max_iter {
        let fit = low_rank(&x, config.k);
        max_change = 0.0;
        for &(i, j) in &missing {
            let change = (fit[(i, j)] - x[(i, j)]).abs();
            max_change = f64::max(max_change, change);
            x[(i, j)] = fit[(i, j)];
        }
        iterations += 1;
        converged = max_change < config.tol;
    }

    let mut panel = p.clone();
    panel.data = x;
    Ok(Imputation {
        panel,
        iterations,
        converged,
        max_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::tests::gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("S{j}")).collect()
    }

    #[test]
    fn complete_panel_is_unchanged() {
        let p = Panel::new(gaussian(30, 5, 1), ids(5)).unwrap();
        let r = impute_missing(&p, &ImputeConfig::default()).unwrap();
        assert_eq!(r.panel, p);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn recovers_rank_one_panel() {
        let f = gaussian(80, 1, 2);
        let l = gaussian(1, 30, 3);
        let truth = &f * &l;
        let mut data = truth.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut masked = Vec::new();
        for i in 0..80 {
            for j in 0..30 {
                if rng.random::<f64>() < 0.1 {
                    data[(i, j)] = f64::NAN;
                    masked.push((i, j));
                }
            }
        }
        let p = Panel::new(data, ids(30)).unwrap();
        let cfg = ImputeConfig {
            k: 1,
            ..Default::default()
        };
        let r = impute_missing(&p, &cfg).unwrap();
        assert!(
            r.converged,
            "{} iterations, change {}",
            r.iterations, r.max_change
        );
        let err = masked
            .iter()
            .map(|&(i, j)| (r.panel.data[(i, j)] - truth[(i, j)]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "max reconstruction error {err}");
        for i in 0..80 {
            for j in 0..30 {
                if p.observed[(i, j)] {
                    assert_eq!(r.panel.data[(i, j)], p.data[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn mostly_missing_column_is_rejected() {
        let mut data = gaussian(20, 3, 5);
        data.column_mut(2).fill(f64::NAN);
        let p = Panel::new(data, ids(3)).unwrap();
        assert!(matches!(
            impute_missing(&p, &ImputeConfig::default()),
            Err(Error::InvalidParameter(_))
        ));
    }
}
