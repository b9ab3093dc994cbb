//! Comparison of transformation policies by out-of-sample forecast accuracy:
//! per-series MASE, a one-sided Wilcoxon signed-rank test on the scaled
//! errors with Benjamini-Hochberg control, and group summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factors::Panel;
use crate::forecast::{forecast_series, scaled_errors, ForecastConfig};
use crate::ingest::{group_label, TCode};
use crate::policy::{choose_transform, longest_observed_run, Policy, PolicyConfig};
use crate::special::normal_cdf;

/// Largest sample evaluated with the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Minimum number of scaled errors for a series to enter the test.
pub const MIN_TEST_OBS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// P-value against the alternative that the differences sit below zero.
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Mid-ranks of `|d|` (1-based) and the tie-group sizes.
fn midranks(abs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..abs.len()).collect();
    idx.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && abs[idx[j + 1]] == abs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// One-sided signed-rank test of `H0: median(d) >= 0` against `median(d) < 0`.
///
/// Zeros are dropped and ties receive mid-ranks. Up to
/// [`WILCOXON_EXACT_MAX`] differences the p-value comes from the exact
/// permutation distribution of the (possibly tied) ranks; above that from the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank_less(d: &[f64]) -> Result<WilcoxonResult> {
    if let Some(index) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            p_value: 1.0,
            n: 0,
            exact: true,
        });
    }
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= WILCOXON_EXACT_MAX {
        // Doubled mid-ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let observed = (2.0 * w_plus).round() as usize;
        let below: f64 = counts[..=observed].iter().sum();
        let p_value = (below / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult {
            w_plus,
            p_value,
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let p_value = if var > 0.0 {
        normal_cdf((w_plus - mean + 0.5) / var.sqrt())
    } else {
        1.0
    };
    Ok(WilcoxonResult {
        w_plus,
        p_value: p_value.clamp(0.0, 1.0),
        n,
        exact: false,
    })
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &i) in idx.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (pos + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

/// Test outcome for one series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSignificance {
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFraction {
    pub group: Option<u8>,
    pub tested: usize,
    pub significant: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Significance {
    /// Per input series; `None` for series with too few scaled errors.
    pub series: Vec<Option<SeriesSignificance>>,
    pub groups: Vec<GroupFraction>,
    /// Fraction over every tested series.
    pub overall: f64,
    pub excluded: usize,
}

/// Tests each series' `|q_t| - 1` for a median below zero, adjusts across all
/// tested series, and reports the share of significant series per group.
pub fn significance_fractions(
    scaled: &[(Option<u8>, Vec<f64>)],
    alpha: f64,
) -> Result<Significance> {
    let mut raw = Vec::new();
    let mut tested_idx = Vec::new();
    for (i, (_, q)) in scaled.iter().enumerate() {
        if q.len() < MIN_TEST_OBS {
            continue;
        }
        let d: Vec<f64> = q.iter().map(|v| v.abs() - 1.0).collect();
        raw.push(wilcoxon_signed_rank_less(&d)?.p_value);
        tested_idx.push(i);
    }
    let adjusted = benjamini_hochberg(&raw);
    let mut series = vec![None; scaled.len()];
    for (k, &i) in tested_idx.iter().enumerate() {
        series[i] = Some(SeriesSignificance {
            p_value: raw[k],
            p_adjusted: adjusted[k],
            significant: adjusted[k] < alpha,
        });
    }

    let mut labels: Vec<Option<u8>> = scaled.iter().map(|(g, _)| *g).collect();
    labels.sort_by_key(|g| g.map_or(u16::MAX, u16::from));
    labels.dedup();
    let groups = labels
        .into_iter()
        .map(|g| {
            let members: Vec<&SeriesSignificance> = scaled
                .iter()
                .zip(&series)
                .filter(|((gi, _), _)| *gi == g)
                .filter_map(|(_, s)| s.as_ref())
                .collect();
            let significant = members.iter().filter(|s| s.significant).count();
            GroupFraction {
                group: g,
                tested: members.len(),
                significant,
                fraction: if members.is_empty() {
                    0.0
                } else {
                    significant as f64 / members.len() as f64
                },
            }
        })
        .collect();
    let total_sig = series.iter().flatten().filter(|s| s.significant).count();
    Ok(Significance {
        overall: if tested_idx.is_empty() {
            0.0
        } else {
            total_sig as f64 / tested_idx.len() as f64
        },
        excluded: scaled.len() - tested_idx.len(),
        series,
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEval {
    pub id: String,
    pub group: Option<u8>,
    pub policy: Policy,
    pub lambda_hat: Option<f64>,
    pub fallback: bool,
    pub mase: f64,
    pub scaled_errors: Vec<f64>,
    pub clipped: usize,
}

/// Chooses the series' transformation on the pre-holdout sample, then
/// forecasts the holdout and scales the errors.
pub fn evaluate_series(
    id: &str,
    group: Option<u8>,
    levels: &[f64],
    tcode: TCode,
    policy: Policy,
    policy_cfg: &PolicyConfig,
    cfg: &ForecastConfig,
) -> Result<SeriesEval> {
    cfg.validate()?;
    if levels.len() < cfg.min_train + cfg.holdout {
        return Err(Error::TooShort {
            required: cfg.min_train + cfg.holdout,
            actual: levels.len(),
        });
    }
    let train = &levels[..levels.len() - cfg.holdout];
    let choice = choose_transform(train, tcode, policy, policy_cfg)?;
    let points = forecast_series(levels, &choice.transform, cfg)?;
    let errors: Vec<f64> = points.iter().map(|p| p.error()).collect();
    let q = scaled_errors(&errors, train)?;
    let mase = q.iter().map(|v| v.abs()).sum::<f64>() / q.len() as f64;
    Ok(SeriesEval {
        id: id.to_string(),
        group,
        policy,
        lambda_hat: choice.lambda_hat,
        fallback: choice.fallback,
        mase,
        scaled_errors: q,
        clipped: points.iter().filter(|p| p.clipped).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub id: String,
    pub policy: Policy,
    pub message: String,
}

/// One row of the comparison table; arrays follow [`Policy::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub n_series: usize,
    pub mean: [f64; 3],
    pub median: [f64; 3],
    pub fraction: [f64; 3],
    pub mean_winner: Option<Policy>,
    pub median_winner: Option<Policy>,
    pub fraction_winner: Option<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub alpha: f64,
    pub rows: Vec<GroupSummary>,
    /// Series evaluated under every policy, in panel order; index by [`Policy::ALL`].
    pub series: Vec<[SeriesEval; 3]>,
    pub significance: [Significance; 3],
    pub skipped: Vec<Skipped>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Unique strict minimum below one.
fn lowest_below_one(v: &[f64; 3]) -> Option<Policy> {
    let (i, &best) = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let unique = v.iter().filter(|&&x| x == best).count() == 1;
    (unique && best < 1.0).then(|| Policy::ALL[i])
}

/// Unique strict maximum.
fn highest(v: &[f64; 3]) -> Option<Policy> {
    let (i, &best) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    (v.iter().filter(|&&x| x == best).count() == 1).then(|| Policy::ALL[i])
}

fn summarize(label: String, members: &[&[SeriesEval; 3]], fraction: [f64; 3]) -> GroupSummary {
    let col = |k: usize| -> Vec<f64> { members.iter().map(|s| s[k].mase).collect() };
    let mean: [f64; 3] = std::array::from_fn(|k| mean(&col(k)));
    let median: [f64; 3] = std::array::from_fn(|k| median(&col(k)));
    GroupSummary {
        label,
        n_series: members.len(),
        mean_winner: lowest_below_one(&mean),
        median_winner: lowest_below_one(&median),
        fraction_winner: highest(&fraction),
        mean,
        median,
        fraction,
    }
}

/// Forecasts every series of a panel of raw levels under all three policies.
///
/// Each series is evaluated on its longest fully observed stretch. Series that
/// fail under any policy are reported in `skipped` and left out of every table
/// so that the policies are compared on the same set.
pub fn evaluate_panel(
    raw: &Panel,
    policy_cfg: &PolicyConfig,
    cfg: &ForecastConfig,
    alpha: f64,
) -> Result<EvalReport> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let default_code = TCode::new(1).expect("valid code");
    let outcomes: Vec<Vec<Result<SeriesEval>>> = (0..raw.n_series())
        .into_par_iter()
        .map(|j| {
            let levels = longest_observed_run(&raw.column(j));
            let tcode = raw.tcodes[j].unwrap_or(default_code);
            Policy::ALL
                .iter()
                .map(|&policy| {
                    evaluate_series(
                        &raw.ids[j],
                        raw.groups[j],
                        &levels,
                        tcode,
                        policy,
                        policy_cfg,
                        cfg,
                    )
                })
                .collect()
        })
        .collect();

    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for (j, results) in outcomes.into_iter().enumerate() {
        let mut ok = Vec::with_capacity(3);
        for (k, r) in results.into_iter().enumerate() {
            match r {
                Ok(e) => ok.push(e),
                Err(e) => skipped.push(Skipped {
                    id: raw.ids[j].clone(),
                    policy: Policy::ALL[k],
                    message: e.to_string(),
                }),
            }
        }
        if let Ok(all) = <[SeriesEval; 3]>::try_from(ok) {
            series.push(all);
        }
    }
    if series.is_empty() {
        return Err(Error::EstimationFailure(
            "no series could be evaluated under every policy".into(),
        ));
    }

    let significance: [Significance; 3] = [0, 1, 2].map(|k| {
        let input: Vec<(Option<u8>, Vec<f64>)> = series
            .iter()
            .map(|s| (s[k].group, s[k].scaled_errors.clone()))
            .collect();
        significance_fractions(&input, alpha).expect("scaled errors are finite")
    });

    let mut rows = Vec::new();
    let all: Vec<&[SeriesEval; 3]> = series.iter().collect();
    rows.push(summarize(
        "All".into(),
        &all,
        std::array::from_fn(|k| significance[k].overall),
    ));
    for g in &significance[0].groups {
        let members: Vec<&[SeriesEval; 3]> =
            series.iter().filter(|s| s[0].group == g.group).collect();
        let fraction = std::array::from_fn(|k| {
            significance[k]
                .groups
                .iter()
                .find(|x| x.group == g.group)
                .map_or(0.0, |x| x.fraction)
        });
        rows.push(summarize(group_label(g.group), &members, fraction));
    }
    Ok(EvalReport {
        alpha,
        rows,
        series,
        significance,
        skipped,
    })
}

/// Writes the group comparison table with one boolean winner column per
/// statistic and policy.
pub fn write_table_csv(report: &EvalReport, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names: Vec<String> = Policy::ALL.iter().map(|p| p.to_string()).collect();
    let mut header = vec!["group".to_string(), "n_series".to_string()];
    for stat in ["mean", "median", "fraction"] {
        header.extend(names.iter().map(|p| format!("{stat}_{p}")));
    }
    for stat in ["mean", "median", "fraction"] {
        header.extend(names.iter().map(|p| format!("{stat}_winner_{p}")));
    }
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.label.clone(), row.n_series.to_string()];
        for v in [row.mean, row.median, row.fraction] {
            rec.extend(v.iter().map(|x| format!("{x:.4}")));
        }
        for winner in [row.mean_winner, row.median_winner, row.fraction_winner] {
            rec.extend(Policy::ALL.iter().map(|p| (winner == Some(*p)).to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_wilcoxon_reference() {
        let d = [-0.5, -0.2, 0.3, -0.9, -1.2, 0.1, -0.4, -0.7];
        let r = wilcoxon_signed_rank_less(&d).unwrap();
        assert_eq!(r.w_plus, 4.0);
        assert!(r.exact);
        assert!((r.p_value - 0.027_343_75).abs() < 1e-15);
    }

    #[test]
    fn exact_and_normal_agree_roughly() {
        let d: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin() - 0.2).collect();
        let exact = wilcoxon_signed_rank_less(&d).unwrap();
        let mut longer = d.clone();
        longer.push(1e-9);
        let approx = wilcoxon_signed_rank_less(&longer).unwrap();
        assert!(!approx.exact);
        assert!((exact.p_value - approx.p_value).abs() < 0.03);
    }

    #[test]
    fn ties_and_zeros() {
        let r = wilcoxon_signed_rank_less(&[0.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.w_plus, 2.0);
        // Subsets of {2, 2, 2} with sum <= 2: the empty set and three singletons.
        assert!((r.p_value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bh_reference_and_monotonicity() {
        let adj = benjamini_hochberg(&[0.01, 0.04, 0.03, 0.2, 0.005]);
        let expected = [0.025, 0.05, 0.05, 0.2, 0.025];
        for (a, e) in adj.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn fraction_examples() {
        let all_two: Vec<(Option<u8>, Vec<f64>)> =
            (0..5).map(|_| (Some(1), vec![2.0; 48])).collect();
        let s = significance_fractions(&all_two, 0.05).unwrap();
        assert_eq!(s.groups[0].fraction, 0.0);
        let small: Vec<(Option<u8>, Vec<f64>)> = (0..5).map(|_| (Some(1), vec![0.1; 48])).collect();
        let s = significance_fractions(&small, 0.05).unwrap();
        assert_eq!(s.groups[0].fraction, 1.0);
        assert_eq!(s.overall, 1.0);
        let short = vec![(Some(2), vec![0.1; 5])];
        assert_eq!(significance_fractions(&short, 0.05).unwrap().excluded, 1);
    }

    #[test]
    fn winners() {
        assert_eq!(lowest_below_one(&[0.9, 0.8, 0.85]), Some(Policy::Boxcox));
        assert_eq!(lowest_below_one(&[1.2, 1.1, 1.3]), None);
        assert_eq!(lowest_below_one(&[0.8, 0.8, 0.9]), None);
        assert_eq!(highest(&[0.79, 0.79, 0.79]), None);
        assert_eq!(highest(&[0.1, 0.2, 0.3]), Some(Policy::Ergodicity));
    }
}
